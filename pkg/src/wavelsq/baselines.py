"""Comparison iterations: Picard fixed point, full Newton and the variant update.

These exist to reproduce the failure modes that motivate the damped
least-squares method, so divergence is detected and reported, never damped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, StabilityError
from .grid import Setup, StateSlice
from .hum import steer
from .lsq import (Y_CAP, ControlledPair, SolverConfig, error_functional, lsq_step, make_initial_pair,
                  residual)
from .nonlinearity import Nonlinearity, hatg

N_SPACE_MODES = 8
N_TIME_MODES = 4
DIVERGENCE_FACTOR = 1e3


@dataclass
class BaselineRecord:
    k: int
    E: float
    increment: float
    y_inf: float
    cg_iters: int
    cg_res: float
    lam: float = 1.0


@dataclass
class BaselineResult:
    method: str
    pair: ControlledPair | None
    records: list[BaselineRecord] = field(default_factory=list)
    status: str = "success"
    message: str = ""


def _controlled(setup, nl, sol, init, target) -> ControlledPair:
    return ControlledPair(sol.trajectory, sol.control, init, target, nl)


def picard_map(setup: Setup, nl: Nonlinearity, xi: np.ndarray, init: StateSlice, target: StateSlice,
               cfg: SolverConfig):
    """K(xi): minimal-norm controlled solution with potential g_hat(xi) and source -g(0)."""
    return steer(setup, hatg(nl, xi), -nl.g0, init, target, tol=cfg.cg_tol, maxit=cfg.cg_maxit,
                 spectral_filter=cfg.spectral_filter)


def picard_step(setup: Setup, nl: Nonlinearity, y_prev: np.ndarray, init: StateSlice, target: StateSlice,
                cfg: SolverConfig | None = None) -> ControlledPair:
    cfg = cfg or SolverConfig()
    return _controlled(setup, nl, picard_map(setup, nl, y_prev, init, target, cfg), init, target)


def _diverging(increments: list[float], y_inf: float) -> bool:
    return (y_inf > Y_CAP or not math.isfinite(increments[-1])
            or (len(increments) > 1 and increments[-1] > DIVERGENCE_FACTOR * increments[0]))


def picard_iterate(setup: Setup, nl: Nonlinearity, init: StateSlice, target: StateSlice,
                   cfg: SolverConfig | None = None, max_iters: int = 50, tol: float = 1e-10) -> BaselineResult:
    """Iterate y_{k+1} = K(y_k) from y_0 = 0; stop when |y_{k+1}-y_k|_inf <= tol (1 + |y|_inf)."""
    cfg = cfg or SolverConfig()
    out = BaselineResult("picard", None)
    y = setup.zeros()
    incs: list[float] = []
    for k in range(max_iters):
        try:
            sol = picard_map(setup, nl, y, init, target, cfg)
        except (StabilityError, ConvergenceError) as exc:
            out.status, out.message = "diverged", str(exc)
            return out
        pair = _controlled(setup, nl, sol, init, target)
        inc = float(np.max(np.abs(pair.y - y)))
        incs.append(inc)
        y_inf = float(np.max(np.abs(pair.y)))
        out.records.append(BaselineRecord(k, error_functional(setup, pair), inc, y_inf, sol.cg_iters,
                                          sol.cg_residual))
        out.pair, y = pair, pair.y
        if inc <= tol * (1.0 + y_inf):
            return out
        if _diverging(incs, y_inf):
            out.status, out.message = "diverged", f"increment {inc:.3e} at k={k}"
            return out
    out.status, out.message = "max_iters", f"increment {incs[-1]:.3e} after {max_iters} iterations"
    return out


def newton_step(setup: Setup, pair: ControlledPair, cfg: SolverConfig | None = None) -> ControlledPair:
    """The least-squares update with the step forced to 1."""
    return lsq_step(setup, pair, cfg or SolverConfig(), lam=1.0).pair


def newton_iterate(setup: Setup, nl: Nonlinearity, init: StateSlice, target: StateSlice,
                   cfg: SolverConfig | None = None) -> BaselineResult:
    """Undamped Newton from the linear controlled pair; an increase of E is recorded, not corrected."""
    cfg = cfg or SolverConfig()
    pair = make_initial_pair(setup, nl, init, target, cfg)
    r = residual(setup, pair)
    E = error_functional(setup, pair, r)
    tol_E = cfg.stop_tolerance(E)
    E0 = E
    out = BaselineResult("newton", pair)
    for k in range(cfg.max_iters):
        if E <= tol_E:
            return out
        try:
            step = lsq_step(setup, pair, cfg, k, r, lam=1.0)
        except (StabilityError, ConvergenceError) as exc:
            out.status, out.message = "diverged", str(exc)
            return out
        rec = step.record
        inc = float(np.max(np.abs(step.pair.y - pair.y)))
        out.records.append(BaselineRecord(k, E, inc, rec.y_inf, rec.cg_iters, rec.cg_res, 1.0))
        pair, r, E = step.pair, step.r_next, step.E_next
        out.pair = pair
        y_inf = float(np.max(np.abs(pair.y)))
        if not math.isfinite(E) or y_inf > Y_CAP or E > DIVERGENCE_FACTOR * (1.0 + E0):
            out.status, out.message = "diverged", f"E={E:.3e} at k={k + 1}"
            return out
    if E > tol_E:
        out.status, out.message = "max_iters", f"E={E:.3e} after {cfg.max_iters} iterations"
    return out


def variant_step(setup: Setup, nl: Nonlinearity, pair: ControlledPair, cfg: SolverConfig | None = None):
    """Controlled pair for potential g'(y_k) and source g'(y_k) y_k - g(y_k)."""
    cfg = cfg or SolverConfig()
    gp = nl.gprime(pair.y)
    sol = steer(setup, gp, gp * pair.y - nl.g(pair.y), pair.init, pair.target, tol=cfg.cg_tol,
                maxit=cfg.cg_maxit, spectral_filter=cfg.spectral_filter)
    return _controlled(setup, nl, sol, pair.init, pair.target), sol


def variant_iterate(setup: Setup, nl: Nonlinearity, init: StateSlice, target: StateSlice,
                    cfg: SolverConfig | None = None, tol: float = 1e-10) -> BaselineResult:
    cfg = cfg or SolverConfig()
    pair = make_initial_pair(setup, nl, init, target, cfg)
    out = BaselineResult("variant", pair)
    incs: list[float] = []
    for k in range(cfg.max_iters):
        E = error_functional(setup, pair)
        try:
            new, sol = variant_step(setup, nl, pair, cfg)
        except (StabilityError, ConvergenceError) as exc:
            out.status, out.message = "diverged", str(exc)
            return out
        inc = float(np.max(np.abs(new.y - pair.y)))
        incs.append(inc)
        y_inf = float(np.max(np.abs(new.y)))
        out.records.append(BaselineRecord(k, E, inc, y_inf, sol.cg_iters, sol.cg_residual))
        pair = out.pair = new
        if inc <= tol * (1.0 + y_inf):
            return out
        if _diverging(incs, y_inf):
            out.status, out.message = "diverged", f"increment {inc:.3e} at k={k}"
            return out
    out.status, out.message = "max_iters", f"increment {incs[-1]:.3e} after {cfg.max_iters} iterations"
    return out


def band_limited_field(setup: Setup, rng: np.random.Generator, radius: float) -> np.ndarray:
    """Random sum of the first 8 sine modes in x times low cosines in t, scaled to sup norm <= radius."""
    a = rng.uniform(-1.0, 1.0, size=(N_SPACE_MODES, N_TIME_MODES))
    sx = np.sin(np.pi * np.outer(setup.x, np.arange(1, N_SPACE_MODES + 1)))
    ct = np.cos(np.pi * np.outer(np.arange(N_TIME_MODES), setup.t / setup.T))
    xi = sx @ a @ ct
    return xi * (radius * rng.uniform(0.0, 1.0) / max(float(np.max(np.abs(xi))), 1e-300))


class ContractionReport(NamedTuple):
    rho_max: float
    ratios: list[float]
    map_gaps: list[float]
    potential_gaps: list[float]
    slope: float
    r_squared: float


def contraction_probe(setup: Setup, nl: Nonlinearity, M_ball: float, trials: int, init: StateSlice,
                      target: StateSlice, cfg: SolverConfig | None = None, seed: int = 0) -> ContractionReport:
    """Sample pairs in the sup-ball, measure |K(xi2)-K(xi1)|/|xi2-xi1| and the g_hat gap.

    ``slope`` fits |K(xi2)-K(xi1)|_inf against |g_hat(xi2)-g_hat(xi1)|_inf
    through the origin.
    """
    cfg = cfg or SolverConfig()
    rng = np.random.default_rng(seed)
    ratios, gaps, pots = [], [], []
    for _ in range(trials):
        xi1 = band_limited_field(setup, rng, M_ball)
        xi2 = band_limited_field(setup, rng, M_ball)
        y1 = picard_map(setup, nl, xi1, init, target, cfg).trajectory
        y2 = picard_map(setup, nl, xi2, init, target, cfg).trajectory
        gap = float(np.max(np.abs(y2 - y1)))
        ratios.append(gap / float(np.max(np.abs(xi2 - xi1))))
        gaps.append(gap)
        pots.append(float(np.max(np.abs(hatg(nl, xi2) - hatg(nl, xi1)))))
    x = np.asarray(pots)
    y = np.asarray(gaps)
    sxx = float(x @ x)
    slope = float(x @ y) / sxx if sxx > 0 else 0.0
    ss = float(y @ y)
    r2 = 1.0 - float(np.sum((y - slope * x) ** 2)) / ss if ss > 0 else 1.0
    return ContractionReport(max(ratios, default=0.0), ratios, gaps, pots, slope, r2)
