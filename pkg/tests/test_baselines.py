import numpy as np
import pytest

from wavelsq.baselines import (band_limited_field, contraction_probe, newton_iterate, newton_step, picard_iterate,
                               picard_map, picard_step, variant_iterate, variant_step)
from wavelsq.diagnostics import convergence_order
from wavelsq.grid import StateSlice, build_setup
from wavelsq.hum import tol_deviation
from wavelsq.lsq import SolverConfig, endpoint_deviation, error_functional, lsq_step, make_initial_pair, replay
from wavelsq.nonlinearity import linear, neglogcube, sine, zero


@pytest.fixture(scope="module")
def s31():
    return build_setup(31, 2.5, (0.2, 0.8))


@pytest.fixture(scope="module")
def small(s31):
    return StateSlice(0.1 * np.sin(np.pi * s31.x), np.zeros(s31.nx)), StateSlice.zeros(s31.nx)


@pytest.fixture(scope="module")
def unit(s31):
    return StateSlice(np.sin(np.pi * s31.x), np.zeros(s31.nx)), StateSlice.zeros(s31.nx)


# ---------------------------------------------------------------- Picard


@pytest.mark.parametrize("nl", [zero(), linear(2.0)], ids=["zero", "linear"])
def test_picard_fixed_point_in_one_step(s31, unit, nl):
    res = picard_iterate(s31, nl, *unit)
    assert res.status == "success"
    assert len(res.records) == 2
    assert res.records[1].increment <= 1e-10
    assert error_functional(s31, res.pair) <= 1e-18


def test_picard_map_of_linear_is_constant(s31, unit):
    rng = np.random.default_rng(0)
    a = picard_map(s31, linear(1.5), band_limited_field(s31, rng, 2.0), *unit, SolverConfig())
    b = picard_map(s31, linear(1.5), band_limited_field(s31, rng, 2.0), *unit, SolverConfig())
    # The map ignores xi; differences come only from the CG stopping rule.
    np.testing.assert_allclose(a.trajectory, b.trajectory, rtol=0, atol=1e-9)


def test_picard_contractive_regime(s31, small):
    res = picard_iterate(s31, sine(0.1), *small)
    assert res.status == "success"
    incs = [r.increment for r in res.records]
    assert all(b < a for a, b in zip(incs, incs[1:]))
    init, target = small
    pair = res.pair
    assert max(endpoint_deviation(s31, pair)) <= tol_deviation(s31, 1e-10, init, target)
    assert replay(s31, pair)[1] <= 10 * tol_deviation(s31, 1e-10, init, target)


def test_picard_step_matches_map(s31, small):
    xi = band_limited_field(s31, np.random.default_rng(1), 0.5)
    pair = picard_step(s31, sine(0.1), xi, *small)
    np.testing.assert_array_equal(pair.y, picard_map(s31, sine(0.1), xi, *small, SolverConfig()).trajectory)


def test_picard_divergence_is_reported(s31):
    init = StateSlice(50 * np.sin(np.pi * s31.x), np.zeros(s31.nx))
    res = picard_iterate(s31, neglogcube(1.0), init, StateSlice.zeros(s31.nx), max_iters=30)
    assert res.status == "diverged"
    assert res.message


# ---------------------------------------------------------------- Newton


def test_newton_step_is_lsq_update_at_one(s31, unit):
    pair = make_initial_pair(s31, sine(3.0), *unit)
    a = newton_step(s31, pair)
    b = lsq_step(s31, pair, SolverConfig(), lam=1.0).pair
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.f, b.f)


def test_newton_coincides_with_lsq_when_search_returns_one(s31, unit):
    pair = make_initial_pair(s31, sine(0.1), *unit)
    cfg = SolverConfig()
    damped = lsq_step(s31, pair, cfg)
    assert damped.record.lam == 1.0
    undamped = newton_step(s31, pair, cfg)
    np.testing.assert_array_equal(damped.pair.y, undamped.y)
    np.testing.assert_array_equal(damped.pair.f, undamped.f)


def test_newton_quadratic_tail(s31):
    init = StateSlice(2 * np.sin(np.pi * s31.x), np.zeros(s31.nx))
    res = newton_iterate(s31, sine(5.0), init, StateSlice.zeros(s31.nx), SolverConfig(tol_E=1e-23))
    assert res.status == "success"
    E = [r.E for r in res.records] + [error_functional(s31, res.pair)]
    assert max(convergence_order(E).orders) >= 1.7


def test_newton_large_data_is_recorded(s31):
    init = StateSlice(20 * np.sin(np.pi * s31.x), np.zeros(s31.nx))
    res = newton_iterate(s31, sine(5.0), init, StateSlice.zeros(s31.nx))
    assert res.status in {"success", "diverged", "max_iters"}
    assert res.records and all(np.isfinite(r.E) for r in res.records)


# ---------------------------------------------------------------- variant


def test_variant_zero_is_initial_pair(s31, unit):
    pair = make_initial_pair(s31, zero(), *unit)
    new, _ = variant_step(s31, zero(), pair)
    np.testing.assert_allclose(new.y, pair.y, rtol=0, atol=1e-13)
    np.testing.assert_allclose(new.f, pair.f, rtol=0, atol=1e-13)


def test_variant_linear_converges_in_one_step(s31, unit):
    res = variant_iterate(s31, linear(2.0), *unit)
    assert res.status == "success"
    assert len(res.records) == 2
    assert error_functional(s31, res.pair) <= 1e-18


def test_variant_sine_converges(s31, unit):
    res = variant_iterate(s31, sine(1.0), *unit)
    assert res.status == "success"
    incs = [r.increment for r in res.records]
    assert incs[-1] <= 1e-10 * (1 + res.records[-1].y_inf)
    # Each iterate is itself a controlled pair.
    assert replay(s31, res.pair)[1] <= 10 * tol_deviation(s31, 1e-10, *unit)


# ---------------------------------------------------------------- contraction probe


@pytest.mark.parametrize("nl", [zero(), linear(3.0)], ids=["zero", "linear"])
def test_probe_trivial_ratio(s31, small, nl):
    rep = contraction_probe(s31, nl, 1.0, 3, *small)
    assert rep.rho_max <= 1e-10


def test_probe_symmetric(s31, small):
    rng = np.random.default_rng(2)
    xi1, xi2 = band_limited_field(s31, rng, 1.0), band_limited_field(s31, rng, 1.0)
    cfg = SolverConfig()
    k1 = picard_map(s31, sine(0.1), xi1, *small, cfg).trajectory
    k2 = picard_map(s31, sine(0.1), xi2, *small, cfg).trajectory
    r12 = np.max(np.abs(k2 - k1)) / np.max(np.abs(xi2 - xi1))
    r21 = np.max(np.abs(k1 - k2)) / np.max(np.abs(xi1 - xi2))
    assert r12 == r21


def test_probe_scaling_in_amplitude(s31, small):
    rhos = [contraction_probe(s31, sine(a), 1.0, 6, *small, seed=3).rho_max for a in (0.05, 0.1, 0.2)]
    assert rhos[0] < 1
    for lo, hi in zip(rhos, rhos[1:]):
        assert 1.5 <= hi / lo <= 2.7


def test_probe_is_seeded(s31, small):
    a = contraction_probe(s31, sine(0.1), 1.0, 2, *small, seed=5)
    b = contraction_probe(s31, sine(0.1), 1.0, 2, *small, seed=5)
    assert a.ratios == b.ratios


def test_band_limited_field_radius(s31):
    rng = np.random.default_rng(4)
    for _ in range(5):
        xi = band_limited_field(s31, rng, 2.0)
        assert np.max(np.abs(xi)) <= 2.0 + 1e-12
