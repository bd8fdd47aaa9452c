"""Least-squares (damped Newton) construction of exact controls for

    y_tt - y_xx + g(y) = f 1_omega,   (y, y_t)(0) = (u0, u1),   (y, y_t)(T) = (z0, z1).

A candidate pair (y, f) keeps its endpoint positions pinned; the endpoint
velocities enter the residual through the one-sided Taylor rows of
:func:`wavelsq.wave.wave_rows`.  Each step solves one minimal-norm null
control problem for the linearized equation with the residual as source and
moves along that direction with a line search on [0, m].
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MaxIterError, StabilityError, StagnationError
from .grid import Setup, StateSlice, inner, norms, v_norm
from .hum import LinearControlProblem, solve_null_control, steer, tol_deviation
from .nonlinearity import Nonlinearity, growth_check, threshold_beta0
from .wave import final_velocity, semilinear_forward, wave_rows

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SCAN_POINTS = 17
Y_CAP = 1e8


@dataclass
class SolverConfig:
    m: float = 2.0
    tol_E: float | None = None
    max_iters: int = 50
    cg_tol: float = 1e-10
    cg_maxit: int = 2000
    ls_tol: float = 1e-4
    spectral_filter: bool = False
    c_emp: float | None = None
    tol_E_scale: float = 1e-16

    def __post_init__(self):
        if self.m < 1:
            raise ValueError(f"line-search cap m={self.m} must be >= 1")
        if self.cg_tol <= 0 or self.ls_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")

    def stop_tolerance(self, E0: float) -> float:
        return self.tol_E if self.tol_E is not None else self.tol_E_scale * (1.0 + E0)


@dataclass
class ControlledPair:
    """Trajectory ``y`` and control ``f`` (zero outside omega) with their endpoint data."""

    y: np.ndarray
    f: np.ndarray
    init: StateSlice
    target: StateSlice
    nl: Nonlinearity = field(repr=False)

    def moved(self, lam: float, Y: np.ndarray, F: np.ndarray) -> "ControlledPair":
        return ControlledPair(self.y - lam * Y, self.f - lam * F, self.init, self.target, self.nl)


@dataclass
class IterationRecord:
    k: int
    E: float
    lam: float
    dir_norm: float
    y_inf: float
    deriv_err: float
    cg_iters: int
    cg_res: float
    wall_time: float
    Y_inf: float = math.nan
    gprime_inf: float = math.nan
    descent_deviation: float = math.nan


@dataclass
class Direction:
    Y: np.ndarray
    F: np.ndarray
    cg_iters: int
    cg_res: float
    deviation: float


@dataclass
class LsqResult:
    pair: ControlledPair
    records: list[IterationRecord]
    energies: list[float]
    status: str = "success"

    def __iter__(self):
        # (pair, records) unpacking
        return iter((self.pair, self.records))


def residual(setup: Setup, pair: ControlledPair) -> np.ndarray:
    """y_tt - y_xx + g(y) - f 1_omega with the solver's own stencil, on all levels."""
    rows = wave_rows(setup, pair.y, pair.init.velocity, pair.target.velocity)
    return rows + pair.nl.g(pair.y) - setup.omega_mask[:, None] * pair.f


def error_functional(setup: Setup, pair: ControlledPair, r: np.ndarray | None = None) -> float:
    if r is None:
        r = residual(setup, pair)
    return 0.5 * inner(setup, r, r)


def linearized_rows(setup: Setup, pair: ControlledPair, Y: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Y_tt - Y_xx + g'(y) Y - F 1_omega for a direction with zero endpoint data."""
    return wave_rows(setup, Y) + pair.nl.gprime(pair.y) * Y - setup.omega_mask[:, None] * F


def descent_pair(setup: Setup, pair: ControlledPair, cfg: SolverConfig, r: np.ndarray | None = None) -> Direction:
    """Minimal-norm null-controlled solution of the linearized equation with source r."""
    if r is None:
        r = residual(setup, pair)
    prob = LinearControlProblem(setup, pair.nl.gprime(pair.y), r, StateSlice.zeros(setup.nx))
    sol = solve_null_control(prob, tol=cfg.cg_tol, maxit=cfg.cg_maxit, spectral_filter=cfg.spectral_filter)
    return Direction(sol.trajectory, sol.control, sol.cg_iters, sol.cg_residual, sol.final_deviation)


def direction_norm(setup: Setup, Y: np.ndarray, F: np.ndarray) -> float:
    """Discrete counterpart of the norm of (Y, F) in the space of controlled pairs."""
    start = StateSlice(Y[:, 0], (Y[:, 1] - Y[:, 0]) / setup.dt)
    L = wave_rows(setup, Y)
    return math.sqrt(inner(setup, Y, Y) + v_norm(setup, start) ** 2 + inner(setup, L, L)
                     + norms(setup, F).l2_qT ** 2)


def directional_derivative_identity(setup: Setup, pair: ControlledPair, Y: np.ndarray, F: np.ndarray,
                                    r: np.ndarray | None = None) -> float:
    """Relative gap |E'(y,f).(Y,F) - 2E| / E, with E' from the inner-product formula."""
    if r is None:
        r = residual(setup, pair)
    E = 0.5 * inner(setup, r, r)
    deriv = inner(setup, r, linearized_rows(setup, pair, Y, F))
    if E == 0.0 and deriv == 0.0:
        return 0.0
    return abs(deriv - 2.0 * E) / max(E, 1e-30)


def line_objective(setup: Setup, pair: ControlledPair, Y: np.ndarray, r: np.ndarray):
    """lambda -> E((y,f) - lambda (Y,F)) = 1/2 |(1-lambda) r + l(y, -lambda Y)|^2.

    Valid because (Y, F) solves the linearized equation with source r; needs
    only pointwise evaluations of g.
    """
    g, gp = pair.nl.g, pair.nl.gprime
    y = pair.y
    gy = g(y)
    slope = gp(y) * Y

    def objective(lam: float) -> float:
        ell = g(y - lam * Y) - gy + lam * slope
        v = (1.0 - lam) * r + ell
        return 0.5 * inner(setup, v, v)

    return objective


def line_search(objective, m: float, tol_ls: float = 1e-4) -> float:
    """Minimize over [0, m]: coarse scan, golden section, then a lambda=1 probe."""
    grid = np.linspace(0.0, m, SCAN_POINTS)
    vals = [objective(float(l)) for l in grid]
    i = int(np.argmin(vals))
    a = float(grid[max(i - 1, 0)])
    b = float(grid[min(i + 1, SCAN_POINTS - 1)])
    best_l, best_v = float(grid[i]), vals[i]
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = objective(c), objective(d)
    while b - a > tol_ls:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = objective(d)
    for lam, val in ((c, fc), (d, fd)):
        if val < best_v:
            best_l, best_v = lam, val
    if objective(1.0) <= best_v:
        return 1.0
    return best_l


def make_initial_pair(setup: Setup, nl: Nonlinearity, init: StateSlice, target: StateSlice,
                      cfg: SolverConfig | None = None) -> ControlledPair:
    """Minimal-norm controlled pair of the linear problem (g = 0)."""
    cfg = cfg or SolverConfig()
    sol = steer(setup, None, None, init, target, tol=cfg.cg_tol, maxit=cfg.cg_maxit,
                spectral_filter=cfg.spectral_filter)
    return ControlledPair(sol.trajectory, sol.control, init, target, nl)


@dataclass
class StepOutcome:
    pair: ControlledPair
    record: IterationRecord
    r_next: np.ndarray
    E_next: float
    direction: Direction


def lsq_step(setup: Setup, pair: ControlledPair, cfg: SolverConfig, k: int = 0,
             r: np.ndarray | None = None, lam: float | None = None) -> StepOutcome:
    """One update (y,f) <- (y,f) - lambda (Y,F); ``lam`` forces the step (Newton when 1)."""
    t0 = time.perf_counter()
    if r is None:
        r = residual(setup, pair)
    E = 0.5 * inner(setup, r, r)
    d = descent_pair(setup, pair, cfg, r)
    err = directional_derivative_identity(setup, pair, d.Y, d.F, r)
    if lam is None:
        lam = line_search(line_objective(setup, pair, d.Y, r), cfg.m, cfg.ls_tol)
    new = pair.moved(lam, d.Y, d.F)
    r_next = residual(setup, new)
    E_next = 0.5 * inner(setup, r_next, r_next)
    rec = IterationRecord(
        k=k, E=E, lam=lam, dir_norm=direction_norm(setup, d.Y, d.F),
        y_inf=float(np.max(np.abs(pair.y))), deriv_err=err, cg_iters=d.cg_iters, cg_res=d.cg_res,
        wall_time=time.perf_counter() - t0, Y_inf=float(np.max(np.abs(d.Y))),
        gprime_inf=float(np.max(np.abs(pair.nl.gprime(pair.y)))), descent_deviation=d.deviation,
    )
    return StepOutcome(new, rec, r_next, E_next, d)


def solve(setup: Setup, nl: Nonlinearity, init: StateSlice, target: StateSlice,
          cfg: SolverConfig | None = None, pair: ControlledPair | None = None,
          callback: Callable[[int, ControlledPair], None] | None = None) -> LsqResult:
    """Run the damped-Newton least-squares iteration until E <= tol_E.

    ``callback(k, pair)`` is called on every iterate, the initial one included.
    """
    cfg = cfg or SolverConfig()
    if cfg.c_emp is not None and nl.s > 0:
        report = growth_check(nl)
        beta0 = threshold_beta0(nl.s, cfg.c_emp)
        if not report.passed or report.beta >= beta0:
            log.warning("growth condition not certified: beta=%s, beta0(s)=%.3g with C=%.3g",
                        report.beta, beta0, cfg.c_emp)
    if pair is None:
        pair = make_initial_pair(setup, nl, init, target, cfg)
    r = residual(setup, pair)
    E = 0.5 * inner(setup, r, r)
    tol_E = cfg.stop_tolerance(E)
    records: list[IterationRecord] = []
    energies = [E]
    k = 0
    if callback is not None:
        callback(0, pair)
    while E > tol_E:
        if k >= cfg.max_iters:
            raise MaxIterError(f"E={E:.3e} > tol_E={tol_E:.1e} after {k} iterations")
        step = lsq_step(setup, pair, cfg, k, r)
        records.append(step.record)
        log.info("k=%d E=%.3e lambda=%.4f cg=%d", k, E, step.record.lam, step.record.cg_iters)
        if not step.E_next < E:
            raise StagnationError(f"E did not decrease at k={k}: {E:.3e} -> {step.E_next:.3e}")
        pair, r, E = step.pair, step.r_next, step.E_next
        energies.append(E)
        if float(np.max(np.abs(pair.y))) > Y_CAP:
            raise StabilityError(f"|y_k| exceeded {Y_CAP:g} at k={k + 1}")
        k += 1
        if callback is not None:
            callback(k, pair)
    return LsqResult(pair, records, energies)


def endpoint_deviation(setup: Setup, pair: ControlledPair) -> tuple[float, float]:
    """Position mismatch at t=0 and t=T (velocities are carried by the residual)."""
    return (math.sqrt(setup.dx) * float(np.linalg.norm(pair.y[:, 0] - pair.init.position)),
            math.sqrt(setup.dx) * float(np.linalg.norm(pair.y[:, -1] - pair.target.position)))


def replay(setup: Setup, pair: ControlledPair) -> tuple[np.ndarray, float]:
    """Drive the full semilinear scheme with the pair's control; return trajectory and final V-distance."""
    source = setup.omega_mask[:, None] * pair.f
    y = semilinear_forward(setup, pair.nl.g, source, pair.init)
    fin = StateSlice(y[:, -1], final_velocity(setup, y, pair.nl.g(y[:, -1]), source[:, -1]))
    return y, v_norm(setup, fin - pair.target)


def deviation_tolerance(setup: Setup, pair: ControlledPair, cfg: SolverConfig) -> float:
    return tol_deviation(setup, cfg.cg_tol, pair.init, pair.target)


def initial_bound_check(setup: Setup, pair: ControlledPair) -> tuple[bool, float, float]:
    """sqrt(E) <= |(y,f)| + sqrt(T)|g(0)| + sqrt(T)(alpha + beta ln^2(1+|y|_inf)) |y|_inf.

    Returns (holds, lhs, rhs).  |Q_T|^{1/2} = sqrt(T) is the exact L^2-to-sup factor.
    """
    nl = pair.nl
    lhs = math.sqrt(error_functional(setup, pair))
    if nl.growth_alpha is None or nl.growth_beta is None:
        return False, lhs, math.inf
    L = wave_rows(setup, pair.y, pair.init.velocity, pair.target.velocity)
    start = StateSlice(pair.y[:, 0], pair.init.velocity)
    h_norm = math.sqrt(inner(setup, pair.y, pair.y) + v_norm(setup, start) ** 2 + inner(setup, L, L)
                       + norms(setup, pair.f).l2_qT ** 2)
    yinf = float(np.max(np.abs(pair.y)))
    rt = math.sqrt(setup.T)
    rhs = h_norm + rt * abs(nl.g0) + rt * (nl.growth_alpha + nl.growth_beta * math.log1p(yinf) ** 2) * yinf
    return lhs <= rhs * (1 + 1e-12), lhs, rhs
