import math

import numpy as np
import pytest

import loanhedge as lh
from loanhedge.errors import ParameterError

from conftest import EXP1_RATES, ZERO_RATES


def _terms(theta0=0.83, theta=0.9, p0=1.0, horizon=0.2):
    return lh.LoanTerms(theta0=theta0, theta=theta, p0=p0, horizon=horizon)


def test_rateset_validation():
    with pytest.raises(ParameterError):
        lh.RateSet(r_bD=0.05, r_cD=0.08, r_bE=0.02, r_cE=0.01)  # negative spread
    with pytest.raises(ParameterError):
        lh.RateSet(r_bD=0.05, r_cD=-0.01, r_bE=0.02, r_cE=0.01)
    rates = lh.RateSet.from_spread(0.08, 0.017, 0.1)
    assert rates.r_bD == pytest.approx(0.18) and rates.r_bE == pytest.approx(0.117)
    assert rates.has_spread and not lh.RateSet.zero().has_spread


def test_terms_validation_and_barrier():
    with pytest.raises(ParameterError):
        _terms(theta0=0.9, theta=0.9)
    with pytest.raises(ParameterError):
        _terms(p0=0.0)
    t = _terms()
    assert t.barrier == pytest.approx(0.83 / 0.9)
    assert 0.83 < t.barrier <= 1.0
    assert t.premium == pytest.approx(0.17)


def test_liquidation_never_binds_on_constant_path():
    t = _terms()
    times = np.linspace(0.0, 0.2, 74)
    res = lh.liquidation_time(np.ones(74), times, t, ZERO_RATES)
    assert not res.hit and res.step_index is None


def test_liquidation_first_breach_index():
    t = _terms()
    times = np.array([0.0, 0.1, 0.2])
    res = lh.liquidation_time(np.array([1.0, 0.95, 0.90]), times, t, ZERO_RATES)
    assert res.hit and res.step_index == 2  # 0.9*0.95 > 0.83 but 0.9*0.90 <= 0.83


def test_liquidation_boundary_equality_counts_as_hit():
    t = _terms()
    times = np.array([0.0, 0.1])
    start = t.barrier * t.p0  # theta * P_0 == theta0 * p0 exactly at t=0
    res = lh.liquidation_time(np.array([start, 1.0]), times, t, ZERO_RATES)
    assert res.hit and res.step_index == 0


def test_liquidation_requires_nonempty_aligned_path():
    t = _terms()
    with pytest.raises(ParameterError):
        lh.liquidation_time(np.array([]), np.array([]), t, ZERO_RATES)
    with pytest.raises(ParameterError):
        lh.liquidation_time(np.array([1.0, 1.0]), np.array([0.0]), t, ZERO_RATES)


def test_payoff_values():
    t = _terms()
    assert lh.payoff(0.0, 1.0, t, ZERO_RATES, pre_barrier=True) == pytest.approx(0.17)
    assert lh.payoff(0.5, 123.0, t, EXP1_RATES, pre_barrier=False) == 0.0
    # hand evaluation: e^{0.017*0.2} - 0.83 e^{0.12*0.2}
    got = lh.payoff(0.2, 1.0, t, EXP1_RATES, pre_barrier=True)
    assert got == pytest.approx(0.15324482270702265, abs=1e-12)


def test_protocol_covered_payoff():
    t = _terms()
    assert lh.protocol_covered_payoff(0.0, t, EXP1_RATES) == pytest.approx(0.83)
    assert lh.protocol_covered_payoff(0.7, t, ZERO_RATES) == pytest.approx(0.83)
    got = lh.protocol_covered_payoff(0.2, t, EXP1_RATES)
    assert got == pytest.approx(0.85016096384921587, abs=1e-12)


def test_payoff_positive_before_barrier_on_simulated_paths():
    t = _terms()
    grid = lh.TimeGrid.from_horizon(0.2, 73)
    batch = lh.simulate_paths(lh.GbmParams(-0.3, 0.8), grid, 1.0, 2000, seed=6)
    hit = lh.first_hit_steps(batch.prices, grid.times, t, EXP1_RATES)
    psi = lh.payoff_matrix(batch.prices, grid.times, t, EXP1_RATES, hit_steps=hit)
    alive = np.arange(grid.n_steps + 1) < hit[:, None]
    assert np.all(psi[alive] > 0.0)
    assert np.all(psi[~alive] == 0.0)


def test_payoff_monotone_in_price_and_scale_invariant():
    t = _terms()
    rng = np.random.default_rng(0)
    for _ in range(200):
        time_pt = rng.uniform(0.0, 0.2)
        p = rng.uniform(0.5, 2.0)
        lam = rng.uniform(0.1, 10.0)
        base = lh.payoff(time_pt, p, t, EXP1_RATES, True)
        assert lh.payoff(time_pt, p + 0.1, t, EXP1_RATES, True) >= base
        scaled_terms = _terms(p0=lam * t.p0)
        scaled = lh.payoff(time_pt, lam * p, scaled_terms, EXP1_RATES, True)
        assert scaled == pytest.approx(lam * base, rel=1e-12)


def test_balance_sheet_identity():
    # payoff + protocol covered leg = collateral leg P_t e^{r_cE t} pre-barrier
    t = _terms()
    rng = np.random.default_rng(1)
    for _ in range(200):
        time_pt = rng.uniform(0.0, 0.2)
        p = rng.uniform(0.93, 3.0)
        total = lh.payoff(time_pt, p, t, EXP1_RATES, True) + lh.protocol_covered_payoff(time_pt, t, EXP1_RATES)
        assert total == pytest.approx(p * math.exp(EXP1_RATES.r_cE * time_pt), rel=1e-12)


def test_payoff_matrix_matches_scalar_definition():
    t = _terms()
    grid = lh.TimeGrid.from_horizon(0.2, 10)
    batch = lh.simulate_paths(lh.GbmParams(0.0, 0.9), grid, 1.0, 50, seed=13)
    hit = lh.first_hit_steps(batch.prices, grid.times, t, EXP1_RATES)
    psi = lh.payoff_matrix(batch.prices, grid.times, t, EXP1_RATES)
    for i in range(10):
        for k in range(grid.n_steps + 1):
            expected = lh.payoff(grid.times[k], batch.prices[i, k], t, EXP1_RATES, k < hit[i])
            assert psi[i, k] == pytest.approx(expected, abs=1e-14)
