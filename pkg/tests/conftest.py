import numpy as np
import pytest

import loanhedge as lh

# Experiment-1 market data (Aave, April 2024) and contract terms used across
# the suite: theta = 0.9, theta0 = 0.83, P0 = 3000, T = 73 days.
EXP1_RATES = lh.RateSet(r_bD=0.12, r_cD=0.08, r_bE=0.025, r_cE=0.017)
NOSPREAD_RATES = lh.RateSet(r_bD=0.08, r_cD=0.08, r_bE=0.017, r_cE=0.017)
ZERO_RATES = lh.RateSet.zero()


@pytest.fixture(scope="session")
def exp1_rates():
    return EXP1_RATES


@pytest.fixture(scope="session")
def nospread_rates():
    return NOSPREAD_RATES


@pytest.fixture(scope="session")
def main_terms():
    return lh.LoanTerms(theta0=0.83, theta=0.9, p0=3000.0, horizon=73 / 365)


@pytest.fixture(scope="session")
def unit_terms():
    return lh.LoanTerms(theta0=0.83, theta=0.9, p0=1.0, horizon=73 / 365)


@pytest.fixture(scope="session")
def grid73():
    return lh.TimeGrid.from_horizon(73 / 365, 73)


@pytest.fixture(scope="session")
def main_cost():
    return lh.CostModel(fee_per_rebalance=20.0, rebalance_epsilon=1e-6, smooth_kappa=0.01)


@pytest.fixture(scope="session")
def trained_main(main_terms, exp1_rates, grid73, main_cost):
    """Desk-scale training at the mu=0, sigma=0.1, theta0=0.83 cell with $20 fees."""
    gbm = lh.GbmParams(mu=0.0, sigma=0.1)
    batch = lh.simulate_paths(gbm, grid73, main_terms.p0, 20_000, seed=5, stream=(1,))
    cfg = lh.TrainConfig(n_epochs=80, batch_paths=1024, seed=3)
    params, log = lh.train_deep_hedge(batch, main_terms, exp1_rates, main_cost, cfg)
    return {"params": params, "log": log, "gbm": gbm, "batch": batch}


@pytest.fixture(scope="session")
def trained_zero_cost(main_terms, nospread_rates, grid73):
    """Same cell with zero spread and zero transaction costs (early-exercise anchor)."""
    gbm = lh.GbmParams(mu=0.0, sigma=0.1)
    batch = lh.simulate_paths(gbm, grid73, main_terms.p0, 20_000, seed=5, stream=(1,))
    cfg = lh.TrainConfig(n_epochs=80, batch_paths=1024, seed=3)
    params, log = lh.train_deep_hedge(batch, main_terms, nospread_rates, lh.CostModel.zero(), cfg)
    return {"params": params, "log": log, "gbm": gbm}
