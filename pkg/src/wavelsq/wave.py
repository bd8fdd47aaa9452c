"""Explicit leapfrog solver for  y_tt - y_xx + A y = S  on the fixed grid.

The scheme, level by level (Delta_h the 3-point Laplacian)::

    y^1     = y^0 + dt v0 + dt^2/2 (Delta_h y^0 - A^0 y^0 + S^0)
    y^{n+1} = 2 y^n - y^{n-1} + dt^2 (Delta_h y^n - A^n y^n + S^n)

Velocities at t=0 and t=T are read out by inverting the Taylor start (from
the front or, time-reversed, from the back).  With this choice the scheme is
exactly reversible and :func:`wave_rows` is zero on every level precisely
for trajectories of the scheme, which is what lets the least-squares
functional reach machine precision.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import StabilityError
from .grid import Setup, StateSlice, laplacian

BLOWUP_CAP = 1e12

Reaction = Callable[[int, np.ndarray], np.ndarray]


def _march(setup: Setup, reaction: Reaction, source: np.ndarray, init: StateSlice,
           cap: float = BLOWUP_CAP) -> np.ndarray:
    dt2 = setup.dt**2
    y = np.empty(setup.shape)
    y[:, 0] = init.position
    acc = laplacian(setup, y[:, 0]) - reaction(0, y[:, 0]) + source[:, 0]
    y[:, 1] = y[:, 0] + setup.dt * np.asarray(init.velocity) + 0.5 * dt2 * acc
    for n in range(1, setup.nt):
        yn = y[:, n]
        acc = laplacian(setup, yn) - reaction(n, yn) + source[:, n]
        nxt = 2.0 * yn - y[:, n - 1] + dt2 * acc
        if not np.all(np.abs(nxt) <= cap):
            raise StabilityError(f"|y| exceeded {cap:g} at time level {n + 1}")
        y[:, n + 1] = nxt
    return y


def wave_forward(setup: Setup, potential=None, source=None, init: StateSlice | None = None) -> np.ndarray:
    """Leapfrog trajectory from ``init`` at t=0; returns an (nx, nt+1) field."""
    A = setup.as_field(potential)
    S = setup.as_field(source)
    if init is None:
        init = StateSlice.zeros(setup.nx)
    return _march(setup, lambda n, yn: A[:, n] * yn, S, init)


def wave_backward(setup: Setup, potential=None, source=None, final: StateSlice | None = None) -> np.ndarray:
    """Solve from data at t=T by marching the time-reversed problem."""
    A = setup.as_field(potential)[:, ::-1]
    S = setup.as_field(source)[:, ::-1]
    if final is None:
        final = StateSlice.zeros(setup.nx)
    rev = _march(setup, lambda n, yn: A[:, n] * yn, S, StateSlice(final.position, -np.asarray(final.velocity)))
    return rev[:, ::-1].copy()


def semilinear_forward(setup: Setup, g: Callable[[np.ndarray], np.ndarray], source=None,
                       init: StateSlice | None = None, cap: float = BLOWUP_CAP) -> np.ndarray:
    """Explicit leapfrog for  y_tt - y_xx + g(y) = S  (same stencil, g at level n)."""
    S = setup.as_field(source)
    if init is None:
        init = StateSlice.zeros(setup.nx)
    return _march(setup, lambda n, yn: g(yn), S, init, cap=cap)


def initial_velocity(setup: Setup, traj: np.ndarray, reaction0=None, source0=None) -> np.ndarray:
    """Velocity at t=0 consistent with the Taylor start.

    ``reaction0`` is the zero-order term at level 0 (A^0 y^0, or g(y^0)).
    """
    y0, y1 = traj[:, 0], traj[:, 1]
    acc = laplacian(setup, y0)
    if reaction0 is not None:
        acc = acc - reaction0
    if source0 is not None:
        acc = acc + source0
    return (y1 - y0) / setup.dt - 0.5 * setup.dt * acc


def final_velocity(setup: Setup, traj: np.ndarray, reactionN=None, sourceN=None) -> np.ndarray:
    """Velocity at t=T consistent with the time-reversed Taylor start."""
    yN, yM = traj[:, -1], traj[:, -2]
    acc = laplacian(setup, yN)
    if reactionN is not None:
        acc = acc - reactionN
    if sourceN is not None:
        acc = acc + sourceN
    return (yN - yM) / setup.dt + 0.5 * setup.dt * acc


def velocity(setup: Setup, traj: np.ndarray, level: int, potential=None, source=None) -> np.ndarray:
    """Velocity readout: centered in the interior, Taylor-consistent at the ends."""
    nt = setup.nt
    if level < 0:
        level += nt + 1
    if not 0 <= level <= nt:
        raise IndexError(f"time level {level} outside [0, {nt}]")
    if 0 < level < nt:
        return (traj[:, level + 1] - traj[:, level - 1]) / (2.0 * setup.dt)
    A = setup.as_field(potential)
    S = setup.as_field(source)
    if level == 0:
        return initial_velocity(setup, traj, A[:, 0] * traj[:, 0], S[:, 0])
    return final_velocity(setup, traj, A[:, -1] * traj[:, -1], S[:, -1])


def initial_state(setup: Setup, traj: np.ndarray, potential=None, source=None) -> StateSlice:
    return StateSlice(traj[:, 0].copy(), velocity(setup, traj, 0, potential, source))


def final_state(setup: Setup, traj: np.ndarray, potential=None, source=None) -> StateSlice:
    return StateSlice(traj[:, -1].copy(), velocity(setup, traj, setup.nt, potential, source))


def energy(setup: Setup, traj: np.ndarray, level: int, potential=None, source=None) -> float:
    """Half the squared V-norm of (y, y_t) at one time level."""
    from .grid import gradient

    v = velocity(setup, traj, level, potential, source)
    grad = gradient(setup, traj[:, level])
    return 0.5 * setup.dx * float(np.sum(v**2) + np.sum(grad**2))


def conserved_energy(setup: Setup, traj: np.ndarray) -> np.ndarray:
    """Leapfrog-invariant quadratic form at each half level n+1/2 (free waves).

    E^{n+1/2} = 1/2 |(y^{n+1}-y^n)/dt|^2 + 1/2 <-Delta_h y^{n+1}, y^n>
    """
    dy = np.diff(traj, axis=1) / setup.dt
    stiff = np.sum(-laplacian(setup, traj[:, 1:]) * traj[:, :-1], axis=0)
    return 0.5 * setup.dx * (np.sum(dy**2, axis=0) + stiff)


def wave_rows(setup: Setup, y: np.ndarray, v0=None, vT=None) -> np.ndarray:
    """Discrete  y_tt - y_xx  on every level, with one-sided Taylor rows at the ends.

    ``v0`` and ``vT`` are the prescribed endpoint velocities (zero if omitted).
    A field ``y`` is a leapfrog trajectory with potential A and source S, whose
    endpoint velocities are v0 and vT, exactly when
    ``wave_rows(y, v0, vT) + A*y == S`` on all levels.
    """
    dt2 = setup.dt**2
    out = np.empty_like(y)
    out[:, 1:-1] = (y[:, 2:] - 2.0 * y[:, 1:-1] + y[:, :-2]) / dt2
    out[:, 0] = 2.0 * (y[:, 1] - y[:, 0]) / dt2
    out[:, -1] = 2.0 * (y[:, -2] - y[:, -1]) / dt2
    if v0 is not None:
        out[:, 0] -= 2.0 * np.asarray(v0) / setup.dt
    if vT is not None:
        out[:, -1] += 2.0 * np.asarray(vT) / setup.dt
    out -= laplacian(setup, y)
    return out
