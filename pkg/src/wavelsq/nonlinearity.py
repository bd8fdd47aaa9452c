"""Nonlinearities g, their derivatives, and the growth/threshold formulas."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

TAYLOR_WINDOW = 1e-8
_CURVATURE_STEP = 1e-4

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Nonlinearity:
    """A C^1 nonlinearity with Hoelder data on g'.

    ``holder_seminorm`` is exact for builtins; for custom functions it is a
    sampled lower bound and ``holder_is_estimate`` is set.  ``growth_alpha``
    and ``growth_beta`` are None when no constants of the form
    |g'(x)| <= alpha + beta ln^2(1+|x|) exist.
    """

    name: str
    g: Func = field(repr=False)
    gprime: Func = field(repr=False)
    s: float
    holder_seminorm: float
    growth_alpha: float | None
    growth_beta: float | None
    params: dict = field(default_factory=dict)
    holder_is_estimate: bool = False

    @property
    def g0(self) -> float:
        return float(self.g(np.zeros(1))[0])

    def __call__(self, y):
        return self.g(np.asarray(y, dtype=float))


def _logsq_gprime(beta_hat: float, x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    lg = np.log1p(ax)
    return beta_hat * (lg**2 + 2.0 * ax * lg / (1.0 + ax))


def _logsq_g2_sup() -> float:
    # sup |d^2/dx^2 (x ln^2(1+|x|))|, attained near x ~ 2.3; dense scan is exact to 1e-9 here.
    x = np.linspace(0.0, 50.0, 2_000_001)
    lg = np.log1p(x)
    g2 = 2.0 * lg / (1 + x) + 2.0 * (lg / (1 + x) + x / (1 + x) ** 2 - x * lg / (1 + x) ** 2)
    return float(np.max(np.abs(g2)))


_LOGSQ_G2 = None


def zero() -> Nonlinearity:
    return Nonlinearity("zero", lambda y: np.zeros_like(y, dtype=float), lambda y: np.zeros_like(y, dtype=float),
                        s=1.0, holder_seminorm=0.0, growth_alpha=0.0, growth_beta=0.0)


def linear(b: float) -> Nonlinearity:
    return Nonlinearity("linear", lambda y: b * y, lambda y: np.full_like(y, b, dtype=float),
                        s=1.0, holder_seminorm=0.0, growth_alpha=abs(b), growth_beta=0.0, params={"b": b})


def sine(a: float) -> Nonlinearity:
    return Nonlinearity("sine", lambda y: a * np.sin(y), lambda y: a * np.cos(y),
                        s=1.0, holder_seminorm=abs(a), growth_alpha=abs(a), growth_beta=0.0, params={"a": a})


def logsq(beta_hat: float) -> Nonlinearity:
    """g(x) = beta_hat * x * ln^2(1+|x|), the near-critical growth family.

    |g'| <= beta_hat/8 + 9 beta_hat ln^2(1+|x|) since 2t <= 8t^2 + 1/8.
    """
    global _LOGSQ_G2
    if _LOGSQ_G2 is None:
        _LOGSQ_G2 = _logsq_g2_sup()
    return Nonlinearity("logsq", lambda y: beta_hat * y * np.log1p(np.abs(y)) ** 2,
                        lambda y: _logsq_gprime(beta_hat, y), s=1.0,
                        holder_seminorm=abs(beta_hat) * _LOGSQ_G2,
                        growth_alpha=abs(beta_hat) / 8.0, growth_beta=9.0 * abs(beta_hat),
                        params={"beta_hat": beta_hat})


def neglogcube(a: float = 1.0) -> Nonlinearity:
    """g(x) = -a x ln^3(1+|x|): bad sign and super-critical growth (blow-up prone)."""

    def gp(y):
        ay = np.abs(y)
        lg = np.log1p(ay)
        return -a * (lg**3 + 3.0 * ay * lg**2 / (1.0 + ay))

    nl = Nonlinearity("neglogcube", lambda y: -a * y * np.log1p(np.abs(y)) ** 3, gp, s=1.0,
                      holder_seminorm=0.0, growth_alpha=None, growth_beta=None, params={"a": a})
    est = estimate_holder_seminorm(nl, (-50.0, 50.0), 1.0, 2000)
    return _replace(nl, holder_seminorm=est, holder_is_estimate=True)


def _replace(nl: Nonlinearity, **kw) -> Nonlinearity:
    from dataclasses import replace
    return replace(nl, **kw)


def with_offset(nl: Nonlinearity, c: float) -> Nonlinearity:
    """g + c; the derivative and all Hoelder/growth data are unchanged."""
    if c == 0.0:
        return nl
    g = nl.g
    return _replace(nl, g=lambda y: g(y) + c, name=nl.name, params={**nl.params, "offset": c})


def custom(g: Func, gprime: Func, s: float = 1.0, holder_seminorm: float | None = None,
           alpha: float | None = None, beta: float | None = None,
           sample_range: tuple[float, float] = (-10.0, 10.0), name: str = "custom") -> Nonlinearity:
    nl = Nonlinearity(name, g, gprime, s=s, holder_seminorm=0.0, growth_alpha=alpha, growth_beta=beta)
    if holder_seminorm is None:
        return _replace(nl, holder_seminorm=estimate_holder_seminorm(nl, sample_range, s, 1000),
                        holder_is_estimate=True)
    return _replace(nl, holder_seminorm=holder_seminorm)


BUILTINS: dict[str, Callable[..., Nonlinearity]] = {
    "zero": zero,
    "linear": linear,
    "sine": sine,
    "logsq": logsq,
    "neglogcube": neglogcube,
}


def eval_g(nl: Nonlinearity, y: np.ndarray) -> np.ndarray:
    return nl.g(np.asarray(y, dtype=float))


def eval_gprime(nl: Nonlinearity, y: np.ndarray) -> np.ndarray:
    return nl.gprime(np.asarray(y, dtype=float))


def hatg(nl: Nonlinearity, x):
    """(g(x) - g(0))/x, continuously extended by g'(0) at the origin."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    g0 = nl.g0
    gp0 = float(nl.gprime(np.zeros(1))[0])
    h = _CURVATURE_STEP
    curv = float((nl.gprime(np.array([h])) - nl.gprime(np.array([-h])))[0] / (2 * h))
    small = np.abs(x) < TAYLOR_WINDOW
    safe = np.where(small, 1.0, x)
    out = np.where(small, gp0 + 0.5 * curv * x, (nl.g(safe) - g0) / safe)
    return float(out[0]) if scalar else out


def estimate_holder_seminorm(nl: Nonlinearity, interval: tuple[float, float], s: float, samples: int = 1000) -> float:
    """Largest sampled |g'(a) - g'(b)| / |a - b|^s over a uniform grid.

    A lower bound on the true seminorm.  With s = 0 the convention
    [g']_0 = 2 sup|g'| is used instead.
    """
    x = np.linspace(interval[0], interval[1], samples)
    gp = nl.gprime(x)
    if s == 0:
        return 2.0 * float(np.max(np.abs(gp)))
    best = 0.0
    chunk = max(1, 4_000_000 // samples)
    for i0 in range(0, samples, chunk):
        a = x[i0:i0 + chunk, None]
        ga = gp[i0:i0 + chunk, None]
        dist = np.abs(a - x[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dist > 0, np.abs(ga - gp[None, :]) / dist**s, 0.0)
        best = max(best, float(np.max(q)))
    return best


def threshold_beta0(s: float, C: float) -> float:
    """beta^0(s) = s^2 / (C^2 (2s+1)^2); zero when s = 0."""
    if s == 0:
        return 0.0
    if not 0 < s <= 1 or C <= 0:
        raise ValueError("need s in (0, 1] and C > 0")
    return s**2 / (C**2 * (2 * s + 1) ** 2)


class GrowthReport(NamedTuple):
    passed: bool
    worst_margin: float
    worst_x: float
    alpha: float
    beta: float


def growth_check(nl: Nonlinearity, interval=(-1e6, 1e6), samples: int = 20001,
                 alpha: float | None = None, beta: float | None = None) -> GrowthReport:
    """Check |g'(x)| <= alpha + beta ln^2(1+|x|) on a sample set; report the worst margin."""
    alpha = nl.growth_alpha if alpha is None else alpha
    beta = nl.growth_beta if beta is None else beta
    if alpha is None or beta is None:
        return GrowthReport(False, -math.inf, math.nan, math.nan, math.nan)
    lo, hi = interval
    xs = [np.linspace(lo, hi, samples)]
    for sign, end in ((1.0, hi), (-1.0, -lo)):
        if end > 0:
            xs.append(sign * np.geomspace(1e-8, end, samples))
    x = np.concatenate(xs + [np.zeros(1)])
    x = x[(x >= lo) & (x <= hi)]
    margin = alpha + beta * np.log1p(np.abs(x)) ** 2 - np.abs(nl.gprime(x))
    i = int(np.argmin(margin))
    return GrowthReport(bool(margin[i] >= -1e-12 * (1 + alpha)), float(margin[i]), float(x[i]), alpha, beta)


def k0_from_c(c: float, E0: float, s: float) -> int:
    """Iterations before the order-(1+s) phase: zero if (1+s) c E0^{s/2} < 1."""
    if s == 0 or (1 + s) * c * E0 ** (s / 2) < 1:
        return 0
    return int(math.floor((1 + s) ** (1 + 1 / s) / s * (c ** (1 / s) * math.sqrt(E0) - 1))) + 1


class Prediction(NamedTuple):
    c: float
    k0: int
    label: str = "prediction with empirical C"


def predict_constants(nl: Nonlinearity, C_emp: float, E0: float, M: float) -> Prediction:
    """c = [g']_s C^{2+s} e^{(1+s)C sqrt(alpha)} (1+M)^{(1+s) C sqrt(beta)} and k0.

    For s = 0, alpha = sup|g'| = [g']_0 / 2 and beta = 0.
    """
    s = nl.s
    if C_emp <= 0:
        raise ValueError("C_emp must be positive")
    if s == 0:
        alpha, beta = nl.holder_seminorm / 2.0, 0.0
    else:
        alpha = nl.growth_alpha if nl.growth_alpha is not None else math.inf
        beta = nl.growth_beta if nl.growth_beta is not None else math.inf
    if nl.holder_seminorm == 0.0:
        # g' constant: the remainder term vanishes identically.
        return Prediction(0.0, 0)
    c = (nl.holder_seminorm * C_emp ** (2 + s) * math.exp((1 + s) * C_emp * math.sqrt(alpha))
         * (1 + M) ** ((1 + s) * C_emp * math.sqrt(beta)))
    return Prediction(c, k0_from_c(c, E0, s))
