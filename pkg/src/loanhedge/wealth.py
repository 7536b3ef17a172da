"""Self-financing wealth recursion with rate spreads and rebalancing costs.

One step of the recursion, for wealth ``v``, position ``pi`` (ETH units),
price ``p`` and increment ``dp`` over ``dt`` years:

    (1 + r_cD dt)(v - pi p)^+  -  (1 + r_bD dt)(v - pi p)^-
  + (1 + r_cE dt) pi^+ (p + dp) -  (1 + r_bE dt) pi^- (p + dp)

Positive cash earns the USDC supply rate, negative cash pays the borrow
rate, long ETH accrues the ETH supply yield, short ETH pays the ETH borrow
rate.  With zero spreads the step is linear in ``(v, pi)``.

Rebalancing costs are tracked in a separate cumulative ledger ``C`` (a flat
fee per executed rebalance, no interest), and the hedger's effective wealth
is ``V - C``.  Training uses the smooth surrogate
``fee * (1 - exp(-|dpi| / kappa))``; reported metrics use the hard rule
``fee * 1{|dpi| > epsilon}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

import numpy as np

from .contract import LoanTerms, RateSet, first_hit_steps, payoff_matrix
from .errors import MetricError, NumericsError, ParameterError
from .market import PathBatch, TimeGrid

if TYPE_CHECKING:  # pragma: no cover
    from .strategies import Strategy

__all__ = [
    "CostModel",
    "HedgeTrajectory",
    "wealth_step",
    "wealth_step_expanded",
    "rebalance_cost",
    "roll_forward",
    "RelativeErrorStats",
    "mean_relative_error",
    "mean_squared_error",
]


@dataclass(frozen=True)
class CostModel:
    """Flat-fee rebalancing cost model.

    ``rebalance_epsilon`` is the position-change threshold below which no fee
    applies in hard mode; ``smooth_kappa`` is the scale of the training
    surrogate ``fee * (1 - exp(-|dpi|/kappa))``.
    """

    fee_per_rebalance: float = 0.0
    rebalance_epsilon: float = 1e-6
    smooth_kappa: float = 0.01

    def __post_init__(self) -> None:
        if self.fee_per_rebalance < 0.0:
            raise ParameterError("fee_per_rebalance must be >= 0")
        if self.rebalance_epsilon < 0.0:
            raise ParameterError("rebalance_epsilon must be >= 0")
        if not self.smooth_kappa > 0.0:
            raise ParameterError("smooth_kappa must be > 0")

    @classmethod
    def zero(cls) -> "CostModel":
        return cls(fee_per_rebalance=0.0)


def wealth_step(v, pi, p, dp, rates: RateSet, dt: float):
    """One step of the four-term wealth recursion.  Vectorises over arrays."""
    if not dt > 0.0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    cash = v - pi * p
    p_next = p + dp
    return (
        (1.0 + rates.r_cD * dt) * np.maximum(cash, 0.0)
        - (1.0 + rates.r_bD * dt) * np.maximum(-cash, 0.0)
        + (1.0 + rates.r_cE * dt) * np.maximum(pi, 0.0) * p_next
        - (1.0 + rates.r_bE * dt) * np.maximum(-pi, 0.0) * p_next
    )


def wealth_step_expanded(v, pi, p, dp, rates: RateSet, dt: float):
    """Algebraically expanded form of :func:`wealth_step` (spread terms isolated)."""
    if not dt > 0.0:
        raise ParameterError(f"dt must be > 0, got {dt}")
    cash = v - pi * p
    p_next = p + dp
    return (
        (1.0 + rates.r_cD * dt) * cash
        - rates.spread_d * dt * np.maximum(-cash, 0.0)
        + (1.0 + rates.r_cE * dt) * pi * p_next
        - rates.spread_e * dt * np.maximum(-pi, 0.0) * p_next
    )


def rebalance_cost(pi_new, pi_old, model: CostModel, smooth: bool = False):
    """Cost of moving the position from ``pi_old`` to ``pi_new``.

    Hard mode charges the full fee whenever ``|dpi|`` exceeds the epsilon
    threshold; smooth mode is the bounded differentiable surrogate.  Both lie
    in ``[0, fee]``.
    """
    d = np.abs(np.asarray(pi_new) - np.asarray(pi_old))
    if smooth:
        out = model.fee_per_rebalance * (-np.expm1(-d / model.smooth_kappa))
    else:
        out = model.fee_per_rebalance * (d > model.rebalance_epsilon)
    return float(out) if np.isscalar(pi_new) and np.isscalar(pi_old) else out


@dataclass(frozen=True)
class HedgeTrajectory:
    """Per-path series produced by :func:`roll_forward`.

    ``V`` is the frictionless wealth (shape ``(n_paths, n_steps+1)``), ``C``
    the cumulative cost ledger aligned on grid times (``C[:, 0]`` is the
    initial acquisition fee), ``pi`` the executed positions (shape
    ``(n_paths, n_steps)``, held over ``[t_k, t_{k+1})``), ``psi`` the target
    payoff and ``barrier_step`` the per-path liquidation index
    (``n_steps + 1`` when never hit).  Effective hedger wealth is ``V - C``.
    """

    grid: TimeGrid
    V: np.ndarray
    pi: np.ndarray
    C: np.ndarray
    psi: np.ndarray
    barrier_step: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.V, self.pi, self.C, self.psi, self.barrier_step):
            arr.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.V.shape[0]

    @property
    def effective_wealth(self) -> np.ndarray:
        return self.V - self.C

    def to_csv(self, path: str, max_paths: Optional[int] = None, aggregate: bool = False) -> None:
        """Long-format dump ``(path, time, V, C, psi, pi)``; ``aggregate`` writes per-time means."""
        times = self.grid.times
        k_last = self.grid.n_steps - 1
        with open(path, "w") as fh:
            if aggregate:
                fh.write("time,mean_V,mean_C,mean_psi,mean_pi\n")
                for k, t in enumerate(times):
                    pi_k = self.pi[:, min(k, k_last)].mean()
                    fh.write(
                        f"{t!r},{self.V[:, k].mean()!r},{self.C[:, k].mean()!r},"
                        f"{self.psi[:, k].mean()!r},{pi_k!r}\n"
                    )
                return
            n = self.n_paths if max_paths is None else min(max_paths, self.n_paths)
            fh.write("path,time,V,C,psi,pi\n")
            for i in range(n):
                for k, t in enumerate(times):
                    pi_k = self.pi[i, min(k, k_last)]
                    fh.write(
                        f"{i},{t!r},{self.V[i, k]!r},{self.C[i, k]!r},"
                        f"{self.psi[i, k]!r},{pi_k!r}\n"
                    )


def roll_forward(
    batch: PathBatch,
    strategy: "Strategy",
    v0: float,
    terms: LoanTerms,
    rates: RateSet,
    cost: CostModel,
    smooth_costs: bool = False,
) -> HedgeTrajectory:
    """Roll the wealth recursion forward along every path of ``batch``.

    The strategy is queried once per grid step with the current prices, the
    previously executed positions and the per-path pre-barrier flags; costs
    are charged at the step where the rebalance occurs (the time-0 entry is
    the initial acquisition).
    """
    prices = batch.prices
    times = batch.grid.times
    n_paths, n_steps = prices.shape[0], batch.grid.n_steps
    dt = batch.grid.dt

    hit = first_hit_steps(prices, times, terms, rates)
    psi = payoff_matrix(prices, times, terms, rates, hit_steps=hit)

    V = np.empty((n_paths, n_steps + 1))
    C = np.empty((n_paths, n_steps + 1))
    pi_series = np.empty((n_paths, n_steps))
    V[:, 0] = v0
    pi_prev = np.zeros(n_paths)
    c_run = np.zeros(n_paths)

    for k in range(n_steps):
        pre_barrier = k < hit
        pi_k = np.broadcast_to(
            np.asarray(strategy.positions(k, float(times[k]), prices[:, k], pi_prev, pre_barrier), dtype=float),
            (n_paths,),
        )
        if not np.isfinite(pi_k).all():
            bad = int(np.flatnonzero(~np.isfinite(pi_k))[0])
            raise NumericsError(f"strategy produced non-finite position at path {bad}, step {k}")
        c_run = c_run + rebalance_cost(pi_k, pi_prev, cost, smooth=smooth_costs)
        C[:, k] = c_run
        V[:, k + 1] = wealth_step(V[:, k], pi_k, prices[:, k], prices[:, k + 1] - prices[:, k], rates, dt)
        pi_series[:, k] = pi_k
        pi_prev = pi_k
    C[:, n_steps] = c_run

    if not np.isfinite(V).all():
        bad_path, bad_step = np.argwhere(~np.isfinite(V))[0]
        raise NumericsError(f"non-finite wealth at path {bad_path}, step {bad_step}")

    return HedgeTrajectory(grid=batch.grid, V=V, pi=pi_series, C=C, psi=psi, barrier_step=hit)


@dataclass(frozen=True)
class RelativeErrorStats:
    """Mean relative hedging error with the count of excluded samples."""

    value: float
    n_included: int
    n_excluded: int

    def __float__(self) -> float:
        return self.value


def mean_relative_error(traj: HedgeTrajectory, floor: float) -> RelativeErrorStats:
    """Average of ``(psi - (V - C)) / psi`` over samples with ``psi > floor``.

    Post-barrier samples (``psi = 0``) and near-zero targets are excluded and
    counted.  Uses compensated summation for order-insensitive reduction.
    """
    if not floor > 0.0:
        raise ParameterError(f"floor must be > 0, got {floor}")
    mask = traj.psi > floor
    n_included = int(mask.sum())
    n_excluded = int(mask.size - n_included)
    if n_included == 0:
        raise MetricError(f"all {n_excluded} samples excluded at floor {floor}")
    psi = traj.psi[mask]
    err = (psi - (traj.V[mask] - traj.C[mask])) / np.maximum(psi, floor)
    value = math.fsum(err) / n_included
    return RelativeErrorStats(value=value, n_included=n_included, n_excluded=n_excluded)


def mean_squared_error(traj: HedgeTrajectory) -> float:
    """Mean over paths and grid times of the squared hedging error ``psi - (V - C)``."""
    err = traj.psi - (traj.V - traj.C)
    return float(np.mean(err * err))
