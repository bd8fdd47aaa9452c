"""Post-hoc convergence diagnostics for least-squares runs.

Everything here is computed from a finished run (its energies and
iteration records).  Constants that the theory leaves unspecified are
calibrated on the run itself and every derived quantity is an empirical
prediction, not a certified bound.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .grid import Setup, inner
from .lsq import ControlledPair, IterationRecord, direction_norm, linearized_rows, residual
from .nonlinearity import Nonlinearity, predict_constants

FLOOR_MIN = 1e-24
FLOOR_FACTOR = 1e3


class OrderReport(NamedTuple):
    orders: list[float]
    steps: list[int]
    floor: float
    tail_end: int

    def longest_run_at_least(self, p_min: float) -> int:
        """Length of the longest run of consecutive steps with p >= p_min."""
        best = cur = 0
        for p in self.orders:
            cur = cur + 1 if p >= p_min else 0
            best = max(best, cur)
        return best


def convergence_order(energies: Sequence[float]) -> OrderReport:
    """p_k = ln(e_{k+1}/e_k) / ln(e_k/e_{k-1}) with e_k = sqrt(E_k), before the floor.

    The floor is max(1e-24, last E); energies within a factor 1e3 of it are
    excluded, so the order is only measured where roundoff does not dominate.
    """
    E = np.asarray(energies, dtype=float)
    if E.size == 0:
        return OrderReport([], [], FLOOR_MIN, 0)
    floor = max(FLOOR_MIN, float(E[-1]))
    above = E > FLOOR_FACTOR * floor
    tail_end = int(np.argmin(above)) if not above.all() else E.size
    e = np.sqrt(E[:tail_end])
    orders, steps = [], []
    for k in range(1, e.size - 1):
        num = math.log(e[k + 1] / e[k])
        den = math.log(e[k] / e[k - 1])
        if den == 0.0:
            continue
        orders.append(num / den)
        steps.append(k)
    return OrderReport(orders, steps, floor, tail_end)


def _bound_factor(C: float, G: float) -> float:
    return C * math.exp(C * math.sqrt(max(G, 0.0)))


def _smallest_C(q: float, G: float, rootE: float, lo: float) -> float:
    """Smallest C >= lo with C exp(C sqrt(G)) sqrt(E) >= q (monotone in C)."""
    if rootE <= 0.0 or _bound_factor(lo, G) * rootE >= q:
        return lo
    hi = max(2.0 * lo, 1.0)
    while _bound_factor(hi, G) * rootE < q:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _bound_factor(mid, G) * rootE >= q:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-14 * hi:
            break
    return hi


def calibrate_c_emp(records: Sequence[IterationRecord], T: float) -> float:
    """Smallest C making the direction bound hold on every recorded subproblem.

    Both the pair norm and the sup norm of Y^1 must stay below
    C exp(C sqrt(|g'(y_k)|_inf)) sqrt(E_k); C is also kept at least
    sqrt(T/2) so that sqrt(2) C dominates the L^2-to-sup factor sqrt(T).
    """
    C = math.sqrt(T / 2.0)
    for rec in records:
        q = max(rec.dir_norm, rec.Y_inf)
        C = _smallest_C(q, rec.gprime_inf, math.sqrt(rec.E), C)
    return C


def step_constant(nl: Nonlinearity, C: float, gprime_inf: float) -> float:
    """K = [g']_s C^{2+s} exp((1+s) C sqrt(|g'(y)|_inf))."""
    s = nl.s
    return nl.holder_seminorm * C ** (2 + s) * math.exp((1 + s) * C * math.sqrt(gprime_inf))


def optimal_step(K: float, E: float, s: float, m: float) -> tuple[float, float]:
    """Minimizer and minimum over [0, m] of e(lam) = |1-lam| + lam^{1+s} K E^{s/2}."""
    if E <= 0.0 or K <= 0.0:
        return 1.0, 0.0
    if s == 0:
        return (1.0, K) if K < 1.0 else (0.0, 1.0)
    a = K * E ** (s / 2)
    # e is convex on [0, 1] and increasing beyond 1.
    stat = ((1.0 + s) * a) ** (-1.0 / s)
    lam = min(1.0, stat, m)
    return lam, abs(1.0 - lam) + lam ** (1 + s) * a


class DecayRow(NamedTuple):
    k: int
    E: float
    E_next: float
    K: float
    bound: float
    holds: bool
    lam_measured: float
    lam_predicted: float


class DecayReport(NamedTuple):
    C_emp: float
    rows: list[DecayRow]
    c: float
    k0: int
    M_obs: float

    @property
    def all_hold(self) -> bool:
        return all(r.holds for r in self.rows)


def decay_bound_check(records: Sequence[IterationRecord], energies: Sequence[float], nl: Nonlinearity,
                      T: float, m: float = 2.0, C_emp: float | None = None,
                      M_obs: float | None = None) -> DecayReport:
    """Compare E_{k+1} with min_lam (|1-lam| + lam^{1+s} K_k E_k^{s/2})^2 E_k.

    K_k uses the calibrated constant and the measured |g'(y_k)|_inf.  The
    closed-form minimizer is reported next to the line-search step.
    """
    if C_emp is None:
        C_emp = calibrate_c_emp(records, T)
    if M_obs is None:
        M_obs = max((r.y_inf for r in records), default=0.0)
    rows = []
    for rec, E_next in zip(records, energies[1:]):
        K = step_constant(nl, C_emp, rec.gprime_inf)
        lam_pred, e_min = optimal_step(K, rec.E, nl.s, m)
        bound = e_min**2 * rec.E
        rows.append(DecayRow(rec.k, rec.E, float(E_next), K, bound,
                             bool(E_next <= bound * (1 + 1e-12)), rec.lam, lam_pred))
    E0 = float(energies[0]) if len(energies) else 0.0
    pred = predict_constants(nl, C_emp, E0, M_obs)
    return DecayReport(C_emp, rows, pred.c, pred.k0, M_obs)


class DualNormReport(NamedTuple):
    lower_bound: float
    sqrtE: float
    directions: int


def dual_norm_lower_bound(setup: Setup, pair: ControlledPair, directions: Sequence[tuple[np.ndarray, np.ndarray]]
                          ) -> DualNormReport:
    """max over sampled (Y, F) in A_0 of E'(y,f).(Y,F) / |(Y,F)|.

    A lower bound on the dual norm of E'; the exact sup is not computed.
    """
    r = residual(setup, pair)
    best = 0.0
    for Y, F in directions:
        nrm = direction_norm(setup, Y, F)
        if nrm == 0.0:
            continue
        best = max(best, abs(inner(setup, r, linearized_rows(setup, pair, Y, F))) / nrm)
    return DualNormReport(best, math.sqrt(0.5 * inner(setup, r, r)), len(directions))
