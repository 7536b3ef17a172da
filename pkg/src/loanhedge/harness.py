"""Config-driven experiment harness.

Reads a YAML experiment file, runs the requested grid (simulate, train,
evaluate with hard costs on fresh paths), and writes deterministic CSV
tables, best-effort plots, and a JSON manifest with a config hash and content
hashes of every emitted file.

CSV schemas (units: years for times, numeraire (USDC) for cash amounts):

* ``fig1_curve.csv``: ``T, european_price, premium``.
* grid tables (``exp1_grid.csv``, ``exp2_spread_cost.csv``,
  ``price_vs_spread.csv``): one row per (cell, strategy) with columns
  ``mu, sigma, theta0, theta, p0, spread, fee, strategy, v0, premium,
  mre_mean, mre_std, mse_mean, mse_std, excluded_frac, train_loss_final,
  cost_gap, runtime_s, status, error`` (mre is dimensionless, mse in
  numeraire^2, runtime in seconds).
* ``hedge_trace.csv``: ``time, price, psi, deep_net_wealth, delta_net_wealth``.
* ``train_curve.csv``: ``epoch, loss, grad_norm, v0`` (loss in
  premium-normalised units).

Grid cells run in a thread pool; every cell derives its RNG streams from
``(master seed, cell index)``, so outputs are byte-identical for a given
config regardless of ``--threads``.  A cell failure is recorded and the run
continues; the CLI exits nonzero if any cell failed.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np
import yaml

from .analytic import european_price_curve
from .contract import LoanTerms, RateSet
from .errors import ConfigError
from .market import GbmParams, PathBatch, Scheme, TimeGrid, simulate_paths
from .strategies import (
    DeltaStrategy,
    NeuralStrategy,
    Strategy,
    TrainConfig,
    train_deep_hedge,
)
from .wealth import CostModel, mean_relative_error, mean_squared_error, roll_forward

__all__ = [
    "ExperimentConfig",
    "ResultTable",
    "ExperimentResult",
    "evaluate_strategy",
    "run_experiment",
]

EXPERIMENT_IDS = (
    "fig1_curve",
    "exp1_grid",
    "exp2_spread_cost",
    "hedge_trace",
    "train_curve",
    "price_vs_spread",
)

_GRID_COLUMNS = [
    "mu",
    "sigma",
    "theta0",
    "theta",
    "p0",
    "spread",
    "fee",
    "strategy",
    "v0",
    "premium",
    "mre_mean",
    "mre_std",
    "mse_mean",
    "mse_std",
    "excluded_frac",
    "train_loss_final",
    "cost_gap",
    "runtime_s",
    "status",
    "error",
]


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment file; list-valued fields span the grid."""

    experiment: str
    seed: int
    output_dir: str
    mus: tuple[float, ...]
    sigmas: tuple[float, ...]
    scheme: Scheme
    theta0s: tuple[float, ...]
    theta: float
    p0: float
    horizon: float
    n_steps: int
    rates: Optional[RateSet]
    spreads: tuple[float, ...]
    base_r_cD: float
    base_r_cE: float
    fees: tuple[float, ...]
    rebalance_epsilon: float
    smooth_kappa: float
    n_train_paths: int
    n_eval_paths: int
    n_eval_repeats: int
    train: TrainConfig
    trade_band: float
    floor_frac: float
    fig1: dict

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            experiment = raw["experiment"]
            if experiment not in EXPERIMENT_IDS:
                raise ConfigError(f"unknown experiment {experiment!r}; expected one of {EXPERIMENT_IDS}")
            market = raw.get("market", {})
            terms = raw.get("terms", {})
            rates_raw = raw.get("rates", {})
            cost = raw.get("cost", {})
            mc = raw.get("mc", {})
            train_raw = dict(raw.get("train", {}))
            eval_raw = raw.get("eval", {})

            if "horizon_days" in terms:
                horizon = float(terms["horizon_days"]) / 365.0
                n_steps = int(terms["horizon_days"])
            else:
                horizon = float(terms.get("horizon", 0.2))
                n_steps = int(terms.get("n_steps", 73))

            if "spread" in rates_raw:
                spreads = tuple(float(s) for s in _as_list(rates_raw["spread"]))
                rates = None
                base_r_cD = float(rates_raw.get("r_cD", 0.08))
                base_r_cE = float(rates_raw.get("r_cE", 0.017))
            else:
                spreads = ()
                rates = RateSet(
                    r_bD=float(rates_raw.get("r_bD", 0.12)),
                    r_cD=float(rates_raw.get("r_cD", 0.08)),
                    r_bE=float(rates_raw.get("r_bE", 0.025)),
                    r_cE=float(rates_raw.get("r_cE", 0.017)),
                )
                base_r_cD = rates.r_cD
                base_r_cE = rates.r_cE

            seed = int(raw.get("seed", 0))
            train_raw.setdefault("seed", seed)
            train = TrainConfig(**train_raw)

            return cls(
                experiment=experiment,
                seed=seed,
                output_dir=str(raw.get("output_dir", "out")),
                mus=tuple(float(m) for m in _as_list(market.get("mu", [0.0]))),
                sigmas=tuple(float(s) for s in _as_list(market.get("sigma", [0.1]))),
                scheme=Scheme(market.get("scheme", "exact_lognormal")),
                theta0s=tuple(float(t) for t in _as_list(terms.get("theta0", [0.83]))),
                theta=float(terms.get("theta", 0.9)),
                p0=float(terms.get("p0", 3000.0)),
                horizon=horizon,
                n_steps=n_steps,
                rates=rates,
                spreads=spreads,
                base_r_cD=base_r_cD,
                base_r_cE=base_r_cE,
                fees=tuple(float(f) for f in _as_list(cost.get("fee", [0.0]))),
                rebalance_epsilon=float(cost.get("rebalance_epsilon", 1e-6)),
                smooth_kappa=float(cost.get("smooth_kappa", 0.01)),
                n_train_paths=int(mc.get("n_train_paths", 20_000)),
                n_eval_paths=int(mc.get("n_eval_paths", 10_000)),
                n_eval_repeats=int(mc.get("n_eval_repeats", 10)),
                train=train,
                trade_band=float(eval_raw.get("trade_band", 5e-3)),
                floor_frac=float(eval_raw.get("floor_frac", 1e-4)),
                fig1=dict(raw.get("fig1", {})),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid experiment config: {exc}") from exc

    @classmethod
    def from_yaml(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            raw = yaml.safe_load(fh)
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} does not contain a mapping")
        return cls.from_dict(raw)

    def rates_for(self, spread: float) -> RateSet:
        if self.rates is not None:
            return self.rates
        return RateSet.from_spread(self.base_r_cD, self.base_r_cE, spread)

    def grid_cells(self) -> list[dict]:
        """Cross product of the list-valued fields, in deterministic order."""
        spreads = self.spreads if self.spreads else (None,)
        cells = []
        for mu, sigma, theta0, spread, fee in itertools.product(
            self.mus, self.sigmas, self.theta0s, spreads, self.fees
        ):
            cells.append({"mu": mu, "sigma": sigma, "theta0": theta0, "spread": spread, "fee": fee})
        return cells

    def config_hash(self) -> str:
        blob = json.dumps(
            {k: v for k, v in self.__dict__.items() if k != "train"}
            | {"train": self.train.__dict__, "scheme": self.scheme.value},
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ResultTable:
    """Grid result rows with a fixed column order for deterministic CSV output."""

    rows: list[dict] = field(default_factory=list)

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(_GRID_COLUMNS) + "\n")
            for row in self.rows:
                cells = []
                for col in _GRID_COLUMNS:
                    val = row.get(col, "")
                    if isinstance(val, float):
                        cells.append(repr(val))
                    else:
                        cells.append(str(val) if val is not None else "")
                fh.write(",".join(cells) + "\n")

    @property
    def failed_rows(self) -> list[dict]:
        return [r for r in self.rows if r.get("status") == "failed"]


@dataclass
class ExperimentResult:
    table: ResultTable
    files: dict[str, str]
    failures: list[str]
    manifest_path: str


def evaluate_strategy(
    strategy: Strategy,
    v0: float,
    gbm: GbmParams,
    grid: TimeGrid,
    terms: LoanTerms,
    rates: RateSet,
    cost: CostModel,
    n_paths: int,
    n_repeats: int,
    seed: int,
    floor: float,
) -> dict[str, float]:
    """Hard-cost metrics over ``n_repeats`` independent evaluation batches.

    Every repeat simulates fresh paths from its own stream of ``seed`` (keep
    this seed distinct from the training seed), computes the mean relative
    error and the MSE, and the summary reports mean and standard deviation
    across repeats plus the average excluded-sample fraction.
    """
    mres, mses, excluded = [], [], []
    for rep in range(n_repeats):
        batch = simulate_paths(gbm, grid, terms.p0, n_paths, seed, stream=(7000, rep))
        traj = roll_forward(batch, strategy, v0, terms, rates, cost, smooth_costs=False)
        stats = mean_relative_error(traj, floor)
        mres.append(stats.value)
        mses.append(mean_squared_error(traj))
        excluded.append(stats.n_excluded / (stats.n_included + stats.n_excluded))
    mres_a, mses_a = np.asarray(mres), np.asarray(mses)
    return {
        "mre_mean": float(mres_a.mean()),
        "mre_std": float(mres_a.std(ddof=1)) if n_repeats > 1 else 0.0,
        "mse_mean": float(mses_a.mean()),
        "mse_std": float(mses_a.std(ddof=1)) if n_repeats > 1 else 0.0,
        "excluded_frac": float(np.mean(excluded)),
    }


def _cell_seed(master: int, cell_index: int) -> int:
    return (master * 1_000_003 + cell_index) % 2**31


def _run_grid_cell(config: ExperimentConfig, cell: dict, cell_index: int) -> list[dict]:
    """Train the deep hedge on one grid cell and evaluate deep and delta."""
    t_start = time.perf_counter()
    spread = cell["spread"]
    rates = config.rates_for(spread if spread is not None else 0.0)
    terms = LoanTerms(theta0=cell["theta0"], theta=config.theta, p0=config.p0, horizon=config.horizon)
    grid = TimeGrid.from_horizon(config.horizon, config.n_steps)
    gbm = GbmParams(mu=cell["mu"], sigma=cell["sigma"], scheme=config.scheme)
    cost = CostModel(
        fee_per_rebalance=cell["fee"],
        rebalance_epsilon=config.rebalance_epsilon,
        smooth_kappa=config.smooth_kappa,
    )
    seed = _cell_seed(config.seed, cell_index)
    floor = config.floor_frac * config.p0

    train_batch = simulate_paths(gbm, grid, config.p0, config.n_train_paths, seed, stream=(1,))
    train_cfg = TrainConfig(**{**config.train.__dict__, "seed": seed})
    params, log = train_deep_hedge(train_batch, terms, rates, cost, train_cfg)

    base = {
        "mu": cell["mu"],
        "sigma": cell["sigma"],
        "theta0": cell["theta0"],
        "theta": config.theta,
        "p0": config.p0,
        "spread": spread if spread is not None else rates.spread_d,
        "fee": cell["fee"],
        "premium": terms.premium,
        "status": "ok",
        "error": "",
    }
    rows = []
    for name, strategy, v0 in (
        ("deep", NeuralStrategy(params, trade_band=config.trade_band), params.v0),
        ("delta", DeltaStrategy(rates), terms.premium),
    ):
        metrics = evaluate_strategy(
            strategy, v0, gbm, grid, terms, rates, cost,
            config.n_eval_paths, config.n_eval_repeats, seed, floor,
        )
        rows.append(
            base
            | metrics
            | {
                "strategy": name,
                "v0": v0,
                "train_loss_final": log.final_loss_smooth if name == "deep" else "",
                "cost_gap": log.cost_gap if name == "deep" else "",
                "runtime_s": time.perf_counter() - t_start,
            }
        )
    return rows


def _failed_rows(cell: dict, config: ExperimentConfig, exc: Exception) -> list[dict]:
    base = {
        "mu": cell["mu"],
        "sigma": cell["sigma"],
        "theta0": cell["theta0"],
        "theta": config.theta,
        "p0": config.p0,
        "spread": cell["spread"] if cell["spread"] is not None else "",
        "fee": cell["fee"],
        "status": "failed",
        "error": f"{type(exc).__name__}: {exc}",
    }
    return [base | {"strategy": name} for name in ("deep", "delta")]


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run the configured experiment; returns the table and the emitted files."""
    os.makedirs(config.output_dir, exist_ok=True)
    t_start = time.perf_counter()
    table = ResultTable()
    files: list[str] = []
    failures: list[str] = []
    plot_errors: list[str] = []
    cell_log: list[dict] = []

    if config.experiment == "fig1_curve":
        fig1 = config.fig1
        n_points = int(fig1.get("horizons", 20))
        t_max = float(fig1.get("t_max", 1.0))
        horizons = [t_max * (k + 1) / n_points for k in range(n_points)]
        curve = european_price_curve(
            theta0=float(fig1.get("theta0", 0.83)),
            theta=float(fig1.get("theta", 0.9)),
            sigma=float(fig1.get("sigma", 0.5)),
            horizons=horizons,
            p0=float(fig1.get("p0", 1.0)),
        )
        csv_path = os.path.join(config.output_dir, "fig1_curve.csv")
        with open(csv_path, "w") as fh:
            fh.write("T,european_price,premium\n")
            for t, price, premium in curve:
                fh.write(f"{t!r},{price!r},{premium!r}\n")
        files.append(csv_path)
        try:
            png = os.path.join(config.output_dir, "fig1_curve.png")
            _plot_fig1(curve, png)
            files.append(png)
        except Exception as exc:  # plotting never fails the numeric run
            plot_errors.append(f"fig1_curve: {exc}")

    elif config.experiment in ("exp1_grid", "exp2_spread_cost", "price_vs_spread"):
        cells = config.grid_cells()
        results: dict[int, list[dict]] = {}

        def work(i_cell):
            i, cell = i_cell
            t0 = time.perf_counter()
            try:
                rows = _run_grid_cell(config, cell, i)
                status = "ok"
            except Exception as exc:
                rows = _failed_rows(cell, config, exc)
                status = "failed"
            return i, rows, status, time.perf_counter() - t0

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            for i, rows, status, rt in pool.map(work, enumerate(cells)):
                results[i] = rows
                cell_log.append({"cell": cells[i] | {"index": i}, "status": status, "runtime_s": round(rt, 3)})
                if status == "failed":
                    failures.append(f"cell {i} {cells[i]}: {rows[0]['error']}")
        for i in sorted(results):
            table.rows.extend(results[i])
        cell_log.sort(key=lambda c: c["cell"]["index"])

        csv_path = os.path.join(config.output_dir, f"{config.experiment}.csv")
        table.to_csv(csv_path)
        files.append(csv_path)
        try:
            pngs = _plot_grid(config, table, config.output_dir)
            files.extend(pngs)
        except Exception as exc:
            plot_errors.append(f"{config.experiment} plots: {exc}")

    elif config.experiment in ("hedge_trace", "train_curve"):
        cell = config.grid_cells()[0]
        rates = config.rates_for(cell["spread"] if cell["spread"] is not None else 0.0)
        terms = LoanTerms(theta0=cell["theta0"], theta=config.theta, p0=config.p0, horizon=config.horizon)
        grid = TimeGrid.from_horizon(config.horizon, config.n_steps)
        gbm = GbmParams(mu=cell["mu"], sigma=cell["sigma"], scheme=config.scheme)
        cost = CostModel(cell["fee"], config.rebalance_epsilon, config.smooth_kappa)
        seed = _cell_seed(config.seed, 0)
        batch = simulate_paths(gbm, grid, config.p0, config.n_train_paths, seed, stream=(1,))
        params, log = train_deep_hedge(batch, terms, rates, cost, TrainConfig(**{**config.train.__dict__, "seed": seed}))

        if config.experiment == "train_curve":
            csv_path = os.path.join(config.output_dir, "train_curve.csv")
            log.to_csv(csv_path)
            files.append(csv_path)
            try:
                png = os.path.join(config.output_dir, "train_curve.png")
                _plot_train_curve(log, png)
                files.append(png)
            except Exception as exc:
                plot_errors.append(f"train_curve: {exc}")
        else:
            eval_batch = simulate_paths(gbm, grid, config.p0, 1, seed, stream=(7000, 0))
            deep = roll_forward(eval_batch, NeuralStrategy(params, config.trade_band), params.v0, terms, rates, cost)
            delta = roll_forward(eval_batch, DeltaStrategy(rates), terms.premium, terms, rates, cost)
            csv_path = os.path.join(config.output_dir, "hedge_trace.csv")
            with open(csv_path, "w") as fh:
                fh.write("time,price,psi,deep_net_wealth,delta_net_wealth\n")
                for k, t in enumerate(grid.times):
                    fh.write(
                        f"{float(t)!r},{eval_batch.prices[0, k]!r},{deep.psi[0, k]!r},"
                        f"{deep.V[0, k] - deep.C[0, k]!r},{delta.V[0, k] - delta.C[0, k]!r}\n"
                    )
            files.append(csv_path)
            try:
                png = os.path.join(config.output_dir, "hedge_trace.png")
                _plot_trace(csv_path, png)
                files.append(png)
            except Exception as exc:
                plot_errors.append(f"hedge_trace: {exc}")
    else:  # pragma: no cover - EXPERIMENT_IDS is exhaustive
        raise ConfigError(f"unhandled experiment {config.experiment}")

    manifest = {
        "experiment": config.experiment,
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "cells": cell_log,
        "failures": failures,
        "plot_errors": plot_errors,
        "total_runtime_s": round(time.perf_counter() - t_start, 3),
        "files": {os.path.relpath(p, config.output_dir): _sha256(p) for p in files},
    }
    manifest_path = os.path.join(config.output_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)

    return ExperimentResult(
        table=table,
        files=manifest["files"],
        failures=failures,
        manifest_path=manifest_path,
    )


# ---------------------------------------------------------------------------
# Plot step (best effort; failures are recorded, never raised)
# ---------------------------------------------------------------------------


def _matplotlib():
    import matplotlib

    matplotlib.use("Agg", force=False)
    import matplotlib.pyplot as plt

    return plt


def _plot_fig1(curve: np.ndarray, path: str) -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(curve[:, 0], curve[:, 1], marker="o", label="European barrier price")
    ax.axhline(curve[0, 2], color="k", ls="--", label="premium P0(1-theta0)")
    ax.set_xlabel("T (years)")
    ax.set_ylabel("price")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_train_curve(log, path: str) -> None:
    plt = _matplotlib()
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(log.epoch, log.loss)
    ax.set_xlabel("epoch")
    ax.set_ylabel("training loss (normalised)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_trace(csv_path: str, path: str) -> None:
    plt = _matplotlib()
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(data["time"], data["psi"], label="payoff psi")
    ax.plot(data["time"], data["deep_net_wealth"], label="deep hedge V-C")
    ax.plot(data["time"], data["delta_net_wealth"], label="delta hedge V-C", ls="--")
    ax.set_xlabel("t (years)")
    ax.set_ylabel("numeraire")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def _plot_grid(config: ExperimentConfig, table: ResultTable, out_dir: str) -> list[str]:
    plt = _matplotlib()
    made = []
    ok = [r for r in table.rows if r["status"] == "ok"]
    if not ok:
        return made

    if config.experiment == "exp1_grid" and len(config.mus) > 1 and len(config.sigmas) > 1:
        # Figure-2-style heatmaps: one panel per theta0 per strategy.
        for strategy in ("deep", "delta"):
            fig, axes = plt.subplots(1, len(config.theta0s), figsize=(4 * len(config.theta0s), 3.2), squeeze=False)
            for j, theta0 in enumerate(config.theta0s):
                mat = np.full((len(config.sigmas), len(config.mus)), np.nan)
                for r in ok:
                    if r["strategy"] == strategy and r["theta0"] == theta0:
                        mat[config.sigmas.index(r["sigma"]), config.mus.index(r["mu"])] = abs(r["mre_mean"])
                ax = axes[0][j]
                im = ax.imshow(mat, origin="lower", aspect="auto")
                ax.set_xticks(range(len(config.mus)), [str(m) for m in config.mus])
                ax.set_yticks(range(len(config.sigmas)), [str(s) for s in config.sigmas])
                ax.set_xlabel("mu")
                ax.set_ylabel("sigma")
                ax.set_title(f"|MRE| {strategy}, theta0={theta0}")
                fig.colorbar(im, ax=ax)
            fig.tight_layout()
            p = os.path.join(out_dir, f"mre_heatmap_{strategy}.png")
            fig.savefig(p, dpi=120)
            plt.close(fig)
            made.append(p)

        # Figure-5-style price bars: v0 vs premium per (mu, sigma) at first theta0.
        theta0 = config.theta0s[0]
        rows = [r for r in ok if r["strategy"] == "deep" and r["theta0"] == theta0]
        labels = [f"mu={r['mu']}\nsig={r['sigma']}" for r in rows]
        fig, ax = plt.subplots(figsize=(1.1 * len(rows) + 2, 4))
        xs = np.arange(len(rows))
        ax.bar(xs - 0.2, [r["v0"] for r in rows], width=0.4, label="trained v0")
        ax.bar(xs + 0.2, [r["premium"] for r in rows], width=0.4, label="premium")
        ax.set_xticks(xs, labels, fontsize=7)
        ax.legend()
        fig.tight_layout()
        p = os.path.join(out_dir, "price_bars.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)

    if config.spreads:
        # price-vs-spread and MRE-vs-spread lines (Figure 7 style).
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
        for strategy, marker in (("deep", "o"), ("delta", "s")):
            for fee in config.fees:
                rows = sorted(
                    (r for r in ok if r["strategy"] == strategy and r["fee"] == fee),
                    key=lambda r: r["spread"],
                )
                if rows:
                    ax1.plot(
                        [r["spread"] for r in rows],
                        [abs(r["mre_mean"]) for r in rows],
                        marker=marker,
                        label=f"{strategy}, fee={fee}",
                    )
        ax1.set_xlabel("spread")
        ax1.set_ylabel("|MRE|")
        ax1.set_yscale("log")
        ax1.legend(fontsize=8)
        deep_rows = sorted(
            (r for r in ok if r["strategy"] == "deep" and r["fee"] == config.fees[0]),
            key=lambda r: r["spread"],
        )
        ax2.plot([r["spread"] for r in deep_rows], [r["v0"] for r in deep_rows], marker="o", label="deep v0")
        if deep_rows:
            ax2.axhline(deep_rows[0]["premium"], color="k", ls="--", label="premium")
        ax2.set_xlabel("spread")
        ax2.set_ylabel("price")
        ax2.legend(fontsize=8)
        fig.tight_layout()
        p = os.path.join(out_dir, "spread_curves.png")
        fig.savefig(p, dpi=120)
        plt.close(fig)
        made.append(p)
    return made
