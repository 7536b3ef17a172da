"""Command-line interface.

Subcommands: ``price`` (closed form), ``simulate`` (path dump), ``train``
(one deep-hedge cell), ``evaluate`` (saved policy metrics), ``experiment``
(full config-driven grid), ``verify`` (early-exercise-bound / oracle /
property suite).  Exit codes: 0 success, 1 cell or check failures, 2 config
errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from .analytic import (
    BarrierOrMaturityRule,
    FirstHitLevelRule,
    FixedTimeRule,
    barrier_mc_grid,
    down_and_out_price,
    mc_stopped_value,
    norm_cdf,
)
from .contract import LoanTerms, RateSet
from .drivers import DriverInput, driver_g, driver_g_bar
from .errors import ConfigError, GradientCheckError
from .harness import ExperimentConfig, evaluate_strategy, run_experiment
from .market import GbmParams, Scheme, TimeGrid, risk_neutral_drift, simulate_paths
from .randomness import make_generator
from .strategies import NeuralStrategy, PolicyParams, TrainConfig, gradient_check, train_deep_hedge
from .wealth import CostModel, wealth_step, wealth_step_expanded


def _cmd_price(args) -> int:
    terms = LoanTerms(theta0=args.theta0, theta=args.theta, p0=args.p0, horizon=args.horizon)
    quote = down_and_out_price(terms, args.sigma)
    payload = {
        "european_barrier_price": quote.value,
        "premium": terms.premium,
        "discount_vs_premium": terms.premium - quote.value,
        "d1_bar": quote.d1_bar,
        "d2_bar": quote.d2_bar,
        "components": list(quote.components),
    }
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(f"European down-and-out price : {quote.value:.6f}")
        print(f"Premium P0(1-theta0)        : {terms.premium:.6f}")
        print(f"Early-exercise optionality  : {terms.premium - quote.value:.6f}")
    return 0


def _cmd_simulate(args) -> int:
    grid = TimeGrid.from_horizon(args.horizon, args.steps)
    gbm = GbmParams(mu=args.mu, sigma=args.sigma, scheme=Scheme(args.scheme))
    batch = simulate_paths(gbm, grid, args.p0, args.paths, args.seed)
    batch.to_csv(args.out)
    print(f"wrote {args.paths} paths x {args.steps + 1} times to {args.out}")
    return 0


def _load_config(path: str) -> ExperimentConfig:
    return ExperimentConfig.from_yaml(path)


def _first_cell(config: ExperimentConfig):
    cell = config.grid_cells()[0]
    rates = config.rates_for(cell["spread"] if cell["spread"] is not None else 0.0)
    terms = LoanTerms(theta0=cell["theta0"], theta=config.theta, p0=config.p0, horizon=config.horizon)
    grid = TimeGrid.from_horizon(config.horizon, config.n_steps)
    gbm = GbmParams(mu=cell["mu"], sigma=cell["sigma"], scheme=config.scheme)
    cost = CostModel(cell["fee"], config.rebalance_epsilon, config.smooth_kappa)
    return cell, rates, terms, grid, gbm, cost


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**_config_raw(args.config), "seed": args.seed})
    _, rates, terms, grid, gbm, cost = _first_cell(config)
    os.makedirs(args.out, exist_ok=True)
    batch = simulate_paths(gbm, grid, config.p0, config.n_train_paths, config.seed, stream=(1,))
    params, log = train_deep_hedge(batch, terms, rates, cost, config.train)
    prefix = os.path.join(args.out, "policy")
    params.save(prefix)
    log.to_csv(os.path.join(args.out, "train_curve.csv"))
    print(f"trained v0 = {params.v0:.4f} (premium {terms.premium:.4f}); policy at {prefix}.bin/.json")
    return 0


def _config_raw(path: str) -> dict:
    import yaml

    with open(path) as fh:
        return yaml.safe_load(fh)


def _cmd_evaluate(args) -> int:
    config = _load_config(args.config)
    _, rates, terms, grid, gbm, cost = _first_cell(config)
    params = PolicyParams.load(args.policy)
    strategy = NeuralStrategy(params, trade_band=config.trade_band)
    metrics = evaluate_strategy(
        strategy, params.v0, gbm, grid, terms, rates, cost,
        config.n_eval_paths, config.n_eval_repeats,
        config.seed if args.seed is None else args.seed,
        config.floor_frac * config.p0,
    )
    os.makedirs(args.out, exist_ok=True)
    out_csv = os.path.join(args.out, "evaluate.csv")
    with open(out_csv, "w") as fh:
        fh.write(",".join(metrics) + "\n")
        fh.write(",".join(repr(v) for v in metrics.values()) + "\n")
    for key, val in metrics.items():
        print(f"{key:>14}: {val:.6g}")
    return 0


def _cmd_experiment(args) -> int:
    try:
        config = _load_config(args.config)
        raw = _config_raw(args.config)
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.out is not None:
            raw["output_dir"] = args.out
        config = ExperimentConfig.from_dict(raw)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(config, threads=args.threads)
    print(f"wrote {len(result.files)} files to {config.output_dir} (manifest: {result.manifest_path})")
    if result.failures:
        for failure in result.failures:
            print(f"FAILED {failure}", file=sys.stderr)
        return 1
    return 0


def _check(name: str, ok: bool, detail: str) -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    return ok


def _cmd_verify(args) -> int:
    """Early-exercise bound, pricing oracle, and property checks."""
    ok = True
    terms = LoanTerms(theta0=0.83, theta=0.9, p0=1.0, horizon=0.2)
    rates = RateSet(r_bD=0.08, r_cD=0.08, r_bE=0.017, r_cE=0.017)
    grid = TimeGrid.from_horizon(terms.horizon, 73)
    gbm_q, _ = risk_neutral_drift(GbmParams(mu=0.2, sigma=0.5), rates)
    batch = simulate_paths(gbm_q, grid, terms.p0, args.paths, args.seed)

    est = mc_stopped_value(batch, terms, rates, BarrierOrMaturityRule())
    z = (est.value - terms.premium) / est.std_error
    ok &= _check("stopped process equals premium", abs(z) <= 3.0, f"z={z:+.2f}")

    rules = [
        FixedTimeRule(t=0.0),
        FixedTimeRule(t=terms.horizon),
        FirstHitLevelRule(level=1.1),
        FirstHitLevelRule(level=0.95),
        BarrierOrMaturityRule(),
    ]
    worst = -math.inf
    for rule in rules:
        e = mc_stopped_value(batch, terms, rates, rule)
        worst = max(worst, (e.value - terms.premium) / max(e.std_error, 1e-300))
    ok &= _check("no rule beats the premium", worst <= 3.0, f"worst z={worst:+.2f}")

    quote = down_and_out_price(LoanTerms(0.83, 0.9, 1.0, 0.5), 0.5)
    oracle = barrier_mc_grid(
        0.83, 0.9, [0.5], [0.5],
        n_paths=args.paths, seed=args.seed + 1,
        dt=1.0 / 3650.0 if args.full else 1.0 / 730.0,
    )[(0.5, 0.5)]
    z = (quote.value - oracle.value) / oracle.std_error
    ok &= _check("closed form matches bridge oracle", abs(z) <= 3.0, f"z={z:+.2f}")

    xs = np.linspace(-8, 8, 1001)
    sym = float(np.max(np.abs(norm_cdf(xs) + norm_cdf(-xs) - 1.0)))
    ok &= _check("normal CDF symmetry", sym <= 1e-14, f"max |N(x)+N(-x)-1| = {sym:.2e}")

    rng = make_generator(args.seed, (5,))
    spread_rates = RateSet(r_bD=0.12, r_cD=0.08, r_bE=0.025, r_cE=0.017)
    worst_h = 0.0
    for _ in range(2000):
        y, zz = rng.normal(size=2) * 2.0
        sig = rng.uniform(0.05, 1.5)
        for alpha in (0.5, 2.0, 7.3):
            for drv in (driver_g, driver_g_bar):
                a = drv(DriverInput(0.1, alpha * y, alpha * zz, sig, spread_rates))
                b = alpha * drv(DriverInput(0.1, y, zz, sig, spread_rates))
                worst_h = max(worst_h, abs(a - b) / max(abs(a), abs(b), 1e-12))
    ok &= _check("driver homogeneity", worst_h <= 1e-12, f"worst rel = {worst_h:.2e}")

    v, pi, p, dp = rng.normal(size=4)
    args4 = (v, pi, abs(p) + 0.5, dp)
    two_form = abs(
        wealth_step(*args4, spread_rates, 1 / 365) - wealth_step_expanded(*args4, spread_rates, 1 / 365)
    )
    ok &= _check("wealth step two-form equality", two_form <= 1e-12, f"|diff| = {two_form:.2e}")

    b1 = simulate_paths(GbmParams(0.1, 0.3), grid, 1.0, 1000, seed=args.seed)
    b2 = simulate_paths(GbmParams(0.1, 0.3), grid, 1.0, 1000, seed=args.seed)
    ok &= _check("simulation determinism", bool(np.array_equal(b1.prices, b2.prices)), "bit-identical rerun")

    try:
        worst_g = gradient_check(
            LoanTerms(0.83, 0.9, 3000.0, 0.2), spread_rates,
            CostModel(20.0, 1e-6, 0.01), TrainConfig(seed=args.seed, hidden_width=8),
        )
        ok &= _check("gradient vs finite differences", True, f"worst rel = {worst_g:.2e}")
    except GradientCheckError as exc:
        ok &= _check("gradient vs finite differences", False, str(exc))

    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loanhedge", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="closed-form no-spread European barrier price")
    p.add_argument("--theta0", type=float, default=0.83)
    p.add_argument("--theta", type=float, default=0.9)
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--horizon", type=float, default=0.2, help="maturity in years")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_cmd_price)

    p = sub.add_parser("simulate", help="simulate GBM paths and dump CSV")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--scheme", choices=[s.value for s in Scheme], default="exact_lognormal")
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--horizon", type=float, default=0.2)
    p.add_argument("--steps", type=int, default=73)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="paths.csv")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("train", help="train the deep hedge on the first config cell")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a saved policy under hard costs")
    p.add_argument("--config", required=True)
    p.add_argument("--policy", required=True, help="policy file prefix (without .bin/.json)")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("experiment", help="run a config-driven experiment grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("verify", help="run the early-exercise-bound / oracle suite")
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full", action="store_true", help="use the fine oracle grid (slower)")
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
