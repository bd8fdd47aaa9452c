"""Space-time grid for the 1D wave equation on (0,1) x (0,T).

Fields are plain ``numpy`` arrays of shape ``(nx, nt + 1)``: one row per
interior node, one column per time level.  Dirichlet values at x=0 and x=1
are implicit zeros and are never stored.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_banded

from .errors import GeometryError, ResolutionError

CFL_MARGIN = 0.05
MIN_NODES = 4


class StateSlice(NamedTuple):
    """Position/velocity pair at one time level (an element of H^1_0 x L^2)."""

    position: np.ndarray
    velocity: np.ndarray

    @classmethod
    def zeros(cls, nx: int) -> "StateSlice":
        return cls(np.zeros(nx), np.zeros(nx))

    def __add__(self, other):  # type: ignore[override]
        return StateSlice(self.position + other.position, self.velocity + other.velocity)

    def __sub__(self, other):
        return StateSlice(self.position - other.position, self.velocity - other.velocity)

    def scaled(self, c: float) -> "StateSlice":
        return StateSlice(c * self.position, c * self.velocity)


def control_time_threshold(omega: tuple[float, float]) -> float:
    l1, l2 = omega
    return 2.0 * max(l1, 1.0 - l2)


@dataclass(frozen=True, eq=False)
class Setup:
    """Immutable discretization of Q_T with a control window ``omega``.

    Spatial quadrature lumps the two boundary half-cells onto the first and
    last interior nodes, so ``space_weights`` sums to exactly 1.
    ``omega_mask`` is the covered fraction of each node's (lumped) cell.
    """

    nx: int
    nt: int
    T: float
    omega: tuple[float, float]
    omega_mask: np.ndarray = field(repr=False)

    @property
    def dx(self) -> float:
        return 1.0 / (self.nx + 1)

    @property
    def dt(self) -> float:
        return self.T / self.nt

    @property
    def cfl(self) -> float:
        return self.dt / self.dx

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.nt + 1)

    @property
    def x(self) -> np.ndarray:
        return self.dx * np.arange(1, self.nx + 1)

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(self.nt + 1)

    @property
    def space_weights(self) -> np.ndarray:
        w = np.full(self.nx, self.dx)
        w[0] = w[-1] = 1.5 * self.dx
        return w

    @property
    def time_weights(self) -> np.ndarray:
        tau = np.full(self.nt + 1, self.dt)
        tau[0] = tau[-1] = 0.5 * self.dt
        return tau

    @property
    def observation_weight(self) -> np.ndarray:
        """Per-node weight rho with HUM control u = phi*dx/w and source rho*phi."""
        return self.omega_mask * self.dx / self.space_weights

    @property
    def control_nodes(self) -> np.ndarray:
        return self.omega_mask > 0

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def as_field(self, value) -> np.ndarray:
        """Broadcast ``None``, a scalar, a per-node vector or a full field."""
        if value is None:
            return self.zeros()
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 1 and arr.shape[0] == self.nx:
            arr = arr[:, None]
        return np.broadcast_to(arr, self.shape).astype(float, copy=True)

    def grid_hash(self) -> str:
        key = f"{self.nx}|{self.nt}|{self.T!r}|{self.omega[0]!r}|{self.omega[1]!r}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


def _mask(nx: int, omega: tuple[float, float]) -> np.ndarray:
    dx = 1.0 / (nx + 1)
    x = dx * np.arange(1, nx + 1)
    lo = x - 0.5 * dx
    hi = x + 0.5 * dx
    lo[0] = 0.0
    hi[-1] = 1.0
    covered = np.clip(np.minimum(hi, omega[1]) - np.maximum(lo, omega[0]), 0.0, None)
    return covered / (hi - lo)


def build_setup(nx: int, T: float, omega=(0.2, 0.8), cfl_target: float = 0.9) -> Setup:
    """Build the grid; ``nt`` is the smallest count with dt/dx <= cfl_target."""
    if nx < MIN_NODES:
        raise ResolutionError(f"nx={nx} is below the minimum of {MIN_NODES}")
    l1, l2 = float(omega[0]), float(omega[1])
    if not 0.0 <= l1 < l2 <= 1.0:
        raise GeometryError(f"omega=({l1}, {l2}) must satisfy 0 <= l1 < l2 <= 1")
    threshold = control_time_threshold((l1, l2))
    if not T > threshold:
        raise GeometryError(f"T={T} must exceed 2*max(l1, 1-l2)={threshold}")
    if not 0.0 < cfl_target < 1.0:
        raise ValueError(f"cfl_target={cfl_target} must lie in (0, 1)")
    cfl = min(cfl_target, 1.0 - CFL_MARGIN)
    dx = 1.0 / (nx + 1)
    nt = math.ceil(T / (cfl * dx) - 1e-9)
    return Setup(nx=nx, nt=nt, T=float(T), omega=(l1, l2), omega_mask=_mask(nx, (l1, l2)))


class Norms(NamedTuple):
    l2_QT: float
    l2_qT: float
    linf_QT: float


def inner(setup: Setup, a: np.ndarray, b: np.ndarray, mask: bool = False) -> float:
    """Quadrature inner product over Q_T (or q_T with ``mask``)."""
    w = setup.space_weights * (setup.omega_mask if mask else 1.0)
    return float(np.einsum("i,j,ij,ij->", w, setup.time_weights, a, b))


def norms(setup: Setup, v: np.ndarray) -> Norms:
    """Trapezoidal-in-time, lumped-midpoint-in-space norms of a field."""
    v = np.asarray(v, dtype=float)
    return Norms(
        l2_QT=math.sqrt(max(inner(setup, v, v), 0.0)),
        l2_qT=math.sqrt(max(inner(setup, v, v, mask=True), 0.0)),
        linf_QT=float(np.max(np.abs(v))) if v.size else 0.0,
    )


def laplacian(setup: Setup, y: np.ndarray) -> np.ndarray:
    """3-point Dirichlet Laplacian along axis 0."""
    out = -2.0 * y
    out[1:] += y[:-1]
    out[:-1] += y[1:]
    return out / setup.dx**2


def neg_laplacian_solve(setup: Setup, w: np.ndarray) -> np.ndarray:
    """Solve -Delta_h z = w with homogeneous Dirichlet conditions."""
    n = setup.nx
    inv = 1.0 / setup.dx**2
    ab = np.empty((3, n))
    ab[0, :] = -inv
    ab[1, :] = 2.0 * inv
    ab[2, :] = -inv
    return solve_banded((1, 1), ab, np.asarray(w, dtype=float))


def gradient(setup: Setup, y: np.ndarray) -> np.ndarray:
    """Forward differences over the nx+1 cells, boundary zeros included."""
    padded = np.zeros((setup.nx + 2,) + y.shape[1:])
    padded[1:-1] = y
    return np.diff(padded, axis=0) / setup.dx


def v_norm(setup: Setup, state: StateSlice) -> float:
    """Discrete H^1_0 x L^2 norm."""
    grad = gradient(setup, state.position)
    return math.sqrt(setup.dx * (np.sum(grad**2) + np.sum(state.velocity**2)))


def l2_dot(setup: Setup, a: np.ndarray, b: np.ndarray) -> float:
    """Uniform-weight spatial L^2 product (the duality pairing of the scheme)."""
    return setup.dx * float(np.dot(a, b))
