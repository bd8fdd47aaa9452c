"""Minimal-norm distributed control of  z_tt - z_xx + A z = u 1_omega + B.

The control is u = phi * 1_omega where phi solves the homogeneous adjoint
equation from a seed (phi0, phi1) posed at t=0.  The seed solves the normal
equations  Lambda seed = rhs  of the dual quadratic functional; Lambda is
applied matrix-free (one forward and one backward leapfrog solve) and the
system is solved by conjugate gradient in the L^2 x H^{-1} inner product.

All pairings below are the uniform ``dx`` sums for which the leapfrog scheme
satisfies an exact summation-by-parts identity, so the discrete control is
the exact minimal-norm control of the discrete system.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.fft import dst, idst

from .errors import ConvergenceError, GeometryError
from .grid import Setup, StateSlice, control_time_threshold, l2_dot, laplacian, neg_laplacian_solve, v_norm
from .wave import final_state, initial_velocity, wave_backward, wave_forward

log = logging.getLogger(__name__)

FILTER_KEEP = 0.8


class AdjointSeed(NamedTuple):
    """Adjoint data at t=0: phi0 in L^2, phi1 in H^{-1} (stored by its nodal values)."""

    phi0: np.ndarray
    phi1: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.phi0, self.phi1])

    @classmethod
    def from_vector(cls, v: np.ndarray) -> "AdjointSeed":
        n = v.shape[0] // 2
        return cls(v[:n].copy(), v[n:].copy())


@dataclass
class LinearControlProblem:
    setup: Setup
    A: np.ndarray
    B: np.ndarray
    init: StateSlice
    target: StateSlice | None = None

    def __post_init__(self):
        self.A = self.setup.as_field(self.A)
        self.B = self.setup.as_field(self.B)
        if self.target is None:
            self.target = StateSlice.zeros(self.setup.nx)
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ValueError("potential and source must be finite")


@dataclass
class HumSolution:
    control: np.ndarray
    trajectory: np.ndarray
    seed: AdjointSeed
    cg_iters: int
    cg_residual: float
    final_deviation: float
    source: np.ndarray = field(repr=False)
    adjoint: np.ndarray = field(repr=False)


def adjoint_field(setup: Setup, A, seed: AdjointSeed) -> np.ndarray:
    return wave_forward(setup, A, None, StateSlice(seed.phi0, seed.phi1))


def _backward_readout(setup: Setup, A: np.ndarray, source: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(-psi_t(0), psi(0)) for psi solved backward from zero final data."""
    psi = wave_backward(setup, A, source, None)
    v0 = initial_velocity(setup, psi, A[:, 0] * psi[:, 0], source[:, 0])
    return -v0, psi[:, 0].copy()


def gramian_apply(setup: Setup, A, seed: AdjointSeed) -> AdjointSeed:
    """Apply the controllability Gramian to a seed.

    Returns the pairing representation (-psi_t(0), psi(0)), so that
    ``pairing(gramian_apply(a), b)`` equals the observed inner product of the
    two adjoint solutions over q_T.
    """
    A = setup.as_field(A)
    phi = adjoint_field(setup, A, seed)
    out0, out1 = _backward_readout(setup, A, setup.observation_weight[:, None] * phi)
    return AdjointSeed(out0, out1)


def pairing(setup: Setup, a: AdjointSeed, b: AdjointSeed) -> float:
    """<a, b> = (a0, b0) + (a1, b1) between a dual element and a seed."""
    return l2_dot(setup, a.phi0, b.phi0) + l2_dot(setup, a.phi1, b.phi1)


def h_inner(setup: Setup, a: AdjointSeed, b: AdjointSeed) -> float:
    """L^2 x H^{-1} inner product of two seeds."""
    return l2_dot(setup, a.phi0, b.phi0) + l2_dot(setup, neg_laplacian_solve(setup, a.phi1), b.phi1)


def observed_inner(setup: Setup, phi: np.ndarray, psi: np.ndarray) -> float:
    """Sum over q_T of rho*phi*psi, with rho the observation weight."""
    w = setup.dx * setup.observation_weight
    return float(np.einsum("i,j,ij,ij->", w, setup.time_weights, phi, psi))


def dual_functional(problem: LinearControlProblem, seed: AdjointSeed) -> float:
    """J = 1/2 |phi|^2_{q_T} + (B, phi)_{Q_T} - <(z0, z1), (phi0, phi1)>."""
    s = problem.setup
    phi = adjoint_field(s, problem.A, seed)
    quad = 0.5 * observed_inner(s, phi, phi)
    src = s.dx * float(np.einsum("j,ij,ij->", s.time_weights, problem.B, phi))
    z0, z1 = problem.init
    dual = l2_dot(s, z0, seed.phi1) - l2_dot(s, z1, seed.phi0)
    return quad + src - dual


def null_control_rhs(problem: LinearControlProblem) -> AdjointSeed:
    s = problem.setup
    z0, z1 = problem.init
    b0, b1 = _backward_readout(s, problem.A, problem.B)
    # Sum (B, phi) over Q_T equals <(b0, b1), seed>.
    return AdjointSeed(-z1 - b0, z0 - b1)


def _sine_filter(nx: int) -> Callable[[np.ndarray], np.ndarray]:
    keep = int(np.floor(FILTER_KEEP * nx))

    def project(v: np.ndarray) -> np.ndarray:
        coeffs = dst(v, type=1, norm="ortho")
        coeffs[keep:] = 0.0
        return idst(coeffs, type=1, norm="ortho")

    return project


class CGResult(NamedTuple):
    x: np.ndarray
    iters: int
    residual: float


def conjugate_gradient(apply: Callable[[np.ndarray], np.ndarray], rhs: np.ndarray,
                       precond: Callable[[np.ndarray], np.ndarray], dot: Callable[[np.ndarray, np.ndarray], float],
                       tol: float, maxit: int) -> CGResult:
    """Preconditioned CG; stops when sqrt(<r, P r>) <= tol * sqrt(<r0, P r0>)."""
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = precond(r)
    rz = dot(r, z)
    if rz <= 0.0:
        return CGResult(x, 0, 0.0)
    r0 = np.sqrt(rz)
    p = z.copy()
    for it in range(1, maxit + 1):
        Ap = apply(p)
        alpha = rz / dot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        z = precond(r)
        rz_new = dot(r, z)
        rel = np.sqrt(max(rz_new, 0.0)) / r0
        if rel <= tol:
            return CGResult(x, it, float(rel))
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(f"CG reached maxit={maxit} with relative residual {rel:.3e} > {tol:.1e}")


def tol_deviation(setup: Setup, tol: float, init: StateSlice, target: StateSlice) -> float:
    return 100.0 * tol * (1.0 + v_norm(setup, init) + v_norm(setup, target))


def solve_null_control(problem: LinearControlProblem, tol: float = 1e-10, maxit: int = 2000,
                       spectral_filter: bool = False) -> HumSolution:
    """Minimal L^2(q_T) control driving the state to rest at t=T."""
    s = problem.setup
    if not s.T > control_time_threshold(s.omega):
        raise GeometryError(f"T={s.T} too short for omega={s.omega}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = problem.A
    rhs = null_control_rhs(problem).as_vector()
    nx = s.nx
    project = _sine_filter(nx) if spectral_filter else None

    def split_apply(v):
        if project is not None:
            v = np.concatenate([project(v[:nx]), project(v[nx:])])
        out = gramian_apply(s, A, AdjointSeed(v[:nx], v[nx:])).as_vector()
        if project is not None:
            out = np.concatenate([project(out[:nx]), project(out[nx:])])
        return out

    def precond(r):
        return np.concatenate([r[:nx], -laplacian(s, r[nx:])])

    def dot(a, b):
        return s.dx * float(np.dot(a, b))

    if project is not None:
        rhs = np.concatenate([project(rhs[:nx]), project(rhs[nx:])])
    res = conjugate_gradient(split_apply, rhs, precond, dot, tol, maxit)
    seed = AdjointSeed.from_vector(res.x)
    phi = adjoint_field(s, A, seed)
    ctrl_nodes = s.control_nodes[:, None]
    control = np.where(ctrl_nodes, phi * (s.dx / s.space_weights)[:, None], 0.0)
    source = problem.B + s.omega_mask[:, None] * control
    traj = wave_forward(s, A, source, problem.init)
    achieved = final_state(s, traj, A, source)
    deviation = v_norm(s, achieved - problem.target)
    log.debug("HUM: %d CG iterations, residual %.2e, deviation %.2e", res.iters, res.residual, deviation)
    return HumSolution(control=control, trajectory=traj, seed=seed, cg_iters=res.iters,
                       cg_residual=res.residual, final_deviation=deviation, source=source, adjoint=phi)


def steer(setup: Setup, A, B, init: StateSlice, target: StateSlice, tol: float = 1e-10,
          maxit: int = 2000, spectral_filter: bool = False) -> HumSolution:
    """Minimal-norm control from ``init`` to ``target`` (reduced to a null-control problem)."""
    A = setup.as_field(A)
    B = setup.as_field(B)
    free = wave_backward(setup, A, B, target)
    free_init = StateSlice(free[:, 0].copy(), initial_velocity(setup, free, A[:, 0] * free[:, 0], B[:, 0]))
    deficit = LinearControlProblem(setup, A, None, init - free_init)
    sol = solve_null_control(deficit, tol=tol, maxit=maxit, spectral_filter=spectral_filter)
    source = B + setup.omega_mask[:, None] * sol.control
    traj = sol.trajectory + free
    # Independent replay of the full problem, not the superposition.
    replay = wave_forward(setup, A, source, init)
    deviation = v_norm(setup, final_state(setup, replay, A, source) - target)
    return replace(sol, trajectory=traj, final_deviation=deviation, source=source)
