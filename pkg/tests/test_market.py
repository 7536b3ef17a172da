import math

import numpy as np
import pytest

import loanhedge as lh
from loanhedge.errors import ParameterError


def test_sigma_zero_limit_paths_constant():
    grid = lh.TimeGrid.from_horizon(1.0, 365)
    batch = lh.simulate_paths(lh.GbmParams(mu=0.0, sigma=1e-12), grid, 2.5, 50, seed=1)
    assert np.max(np.abs(batch.prices / 2.5 - 1.0)) < 1e-9


def test_driftless_terminal_mean_is_martingale():
    # mu=0, sigma=0.5, T=1, 365 steps, 1e6 paths (chunked for memory):
    # sample mean of P_T within 3 standard errors of 1.
    grid = lh.TimeGrid.from_horizon(1.0, 365)
    gbm = lh.GbmParams(mu=0.0, sigma=0.5)
    total, total_sq, n = 0.0, 0.0, 0
    for chunk in range(4):
        batch = lh.simulate_paths(gbm, grid, 1.0, 250_000, seed=123, stream=(chunk,))
        p_T = batch.prices[:, -1]
        total += p_T.sum()
        total_sq += (p_T * p_T).sum()
        n += p_T.size
    mean = total / n
    se = math.sqrt((total_sq / n - mean * mean) / (n - 1))
    assert abs(mean - 1.0) <= 3.0 * se


def test_fixed_seed_bit_identical():
    grid = lh.TimeGrid.from_horizon(0.2, 73)
    a = lh.simulate_paths(lh.GbmParams(0.1, 0.4), grid, 1.0, 500, seed=42)
    b = lh.simulate_paths(lh.GbmParams(0.1, 0.4), grid, 1.0, 500, seed=42)
    assert np.array_equal(a.prices, b.prices)
    c = lh.simulate_paths(lh.GbmParams(0.1, 0.4), grid, 1.0, 500, seed=42, stream=(1,))
    assert not np.array_equal(a.prices, c.prices)


def test_parameter_validation():
    grid = lh.TimeGrid.from_horizon(0.2, 73)
    with pytest.raises(ParameterError):
        lh.GbmParams(mu=0.0, sigma=0.0)
    with pytest.raises(ParameterError):
        lh.TimeGrid(dt=0.0, n_steps=10)
    with pytest.raises(ParameterError):
        lh.simulate_paths(lh.GbmParams(0.0, 0.5), grid, -1.0, 10, seed=0)
    with pytest.raises(ParameterError):
        lh.simulate_paths(lh.GbmParams(0.0, 0.5), grid, 1.0, 0, seed=0)


def test_prices_positive_and_start_at_p0():
    grid = lh.TimeGrid.from_horizon(0.2, 73)
    batch = lh.simulate_paths(lh.GbmParams(-0.3, 0.9), grid, 3000.0, 2000, seed=9)
    assert np.all(batch.prices > 0.0)
    assert np.all(batch.prices[:, 0] == 3000.0)
    assert batch.n_paths == 2000


def test_pathbatch_immutable():
    grid = lh.TimeGrid.from_horizon(0.2, 73)
    batch = lh.simulate_paths(lh.GbmParams(0.0, 0.5), grid, 1.0, 10, seed=0)
    with pytest.raises(ValueError):
        batch.prices[0, 0] = 2.0


def test_risk_neutral_drift_examples(exp1_rates):
    q, _ = lh.risk_neutral_drift(lh.GbmParams(mu=0.7, sigma=0.5), lh.RateSet.zero())
    assert q.mu == 0.0
    q, _ = lh.risk_neutral_drift(lh.GbmParams(mu=0.7, sigma=0.5), exp1_rates)
    assert q.mu == pytest.approx(0.063, abs=1e-15)
    _, change = lh.risk_neutral_drift(lh.GbmParams(mu=0.3, sigma=0.5), exp1_rates)
    assert change.nu == pytest.approx(0.474, abs=1e-15)


def test_discounted_price_is_martingale_at_every_grid_time(exp1_rates, grid73):
    q, _ = lh.risk_neutral_drift(lh.GbmParams(mu=0.3, sigma=0.5), exp1_rates)
    batch = lh.simulate_paths(q, grid73, 1.0, 100_000, seed=77)
    adj = batch.prices * np.exp((exp1_rates.r_cE - exp1_rates.r_cD) * grid73.times)
    means = adj.mean(axis=0)
    ses = adj.std(axis=0, ddof=1) / math.sqrt(batch.n_paths)
    z = np.abs(means[1:] - 1.0) / ses[1:]
    assert z.max() <= 4.0


def test_log_return_moments():
    grid = lh.TimeGrid.from_horizon(0.2, 73)
    mu, sigma = 0.3, 0.4
    batch = lh.simulate_paths(lh.GbmParams(mu, sigma), grid, 1.0, 50_000, seed=21)
    increments = np.diff(np.log(batch.prices), axis=1).ravel()
    n = increments.size
    mean, var = increments.mean(), increments.var(ddof=1)
    se_mean = math.sqrt(var / n)
    se_var = var * math.sqrt(2.0 / (n - 1))
    assert abs(mean - (mu - 0.5 * sigma**2) * grid.dt) <= 4.0 * se_mean
    assert abs(var - sigma**2 * grid.dt) <= 4.0 * se_var


def test_euler_bias_halves_with_dt():
    # Same normals for both schemes at each resolution; the mean difference
    # isolates the Euler discretisation bias, which is O(dt).
    mu, sigma, horizon, n_paths = 0.3, 0.3, 1.0, 100_000

    def bias(n_steps, seed):
        grid = lh.TimeGrid.from_horizon(horizon, n_steps)
        exact = lh.simulate_paths(lh.GbmParams(mu, sigma, lh.Scheme.EXACT_LOGNORMAL), grid, 1.0, n_paths, seed)
        euler = lh.simulate_paths(lh.GbmParams(mu, sigma, lh.Scheme.EULER_MARUYAMA), grid, 1.0, n_paths, seed)
        return float(np.mean(exact.prices[:, -1] - euler.prices[:, -1]))

    b1 = bias(365, seed=4)
    b2 = bias(730, seed=4)
    assert abs(b1) > abs(b2) > 0.0
    assert 1.4 <= b1 / b2 <= 3.0


def test_pathbatch_csv_dump(tmp_path):
    grid = lh.TimeGrid.from_horizon(0.02, 2)
    batch = lh.simulate_paths(lh.GbmParams(0.0, 0.5), grid, 1.0, 3, seed=0)
    out = tmp_path / "paths.csv"
    batch.to_csv(str(out))
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 4  # header of grid times + 3 paths
    header = [float(x) for x in lines[0].split(",")]
    assert header == pytest.approx(list(grid.times))
    row = [float(x) for x in lines[1].split(",")]
    assert row == pytest.approx(list(batch.prices[0]))
