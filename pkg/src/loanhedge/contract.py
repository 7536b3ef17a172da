"""Loan terms, liquidation rule, and contract payoffs.

A borrower posts 1 ETH of collateral and draws ``theta0 * P0`` of USDC debt.
Collateral accrues at the ETH supply rate ``r_cE``, debt at the USDC borrow
rate ``r_bD``.  The position is liquidatable at the first grid time where

    ``theta * P_t * exp(r_cE t) <= theta0 * P0 * exp(r_bD t)``

(inclusive inequality, monitored at grid times only).  Before that time the
borrower's claim is worth ``P_t e^{r_cE t} - theta0 P0 e^{r_bD t}``, strictly
positive because ``theta < 1``; at and after it the claim is worth zero (full
write-off).  Before liquidation the protocol side holds the delta-neutral
covered leg ``theta0 P0 e^{r_bD t}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParameterError

__all__ = [
    "RateSet",
    "LoanTerms",
    "LiquidationResult",
    "liquidation_time",
    "first_hit_steps",
    "payoff",
    "payoff_matrix",
    "protocol_covered_payoff",
]


@dataclass(frozen=True)
class RateSet:
    """Annualised borrow/supply rates for the debt asset (USDC) and collateral (ETH).

    Invariants: ``r_bD >= r_cD >= 0`` and ``r_bE >= r_cE >= 0`` (spreads are
    nonnegative).
    """

    r_bD: float
    r_cD: float
    r_bE: float
    r_cE: float

    def __post_init__(self) -> None:
        if not (self.r_bD >= self.r_cD >= 0.0):
            raise ParameterError(f"need r_bD >= r_cD >= 0, got {self.r_bD}, {self.r_cD}")
        if not (self.r_bE >= self.r_cE >= 0.0):
            raise ParameterError(f"need r_bE >= r_cE >= 0, got {self.r_bE}, {self.r_cE}")

    @classmethod
    def zero(cls) -> "RateSet":
        return cls(0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_spread(cls, r_cD: float, r_cE: float, spread: float) -> "RateSet":
        """Supply rates plus a common borrow-supply spread on both assets."""
        return cls(r_bD=r_cD + spread, r_cD=r_cD, r_bE=r_cE + spread, r_cE=r_cE)

    @property
    def spread_d(self) -> float:
        return self.r_bD - self.r_cD

    @property
    def spread_e(self) -> float:
        return self.r_bE - self.r_cE

    @property
    def has_spread(self) -> bool:
        return self.spread_d > 0.0 or self.spread_e > 0.0


@dataclass(frozen=True)
class LoanTerms:
    """Loan contract terms.

    ``barrier`` is the derived knock-out level ``theta0 / theta`` of the
    scaled collateral process; it lies in ``(theta0, 1]``.
    """

    theta0: float
    theta: float
    p0: float
    horizon: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.theta0 < self.theta <= 1.0):
            raise ParameterError(
                f"need 0 <= theta0 < theta <= 1, got theta0={self.theta0}, theta={self.theta}"
            )
        if not self.p0 > 0.0:
            raise ParameterError(f"p0 must be > 0, got {self.p0}")
        if not self.horizon > 0.0:
            raise ParameterError(f"horizon must be > 0, got {self.horizon}")

    @property
    def barrier(self) -> float:
        return self.theta0 / self.theta

    @property
    def premium(self) -> float:
        """Net capital to open the position, ``P0 (1 - theta0)``."""
        return self.p0 * (1.0 - self.theta0)


@dataclass(frozen=True)
class LiquidationResult:
    """First grid index at which the liquidation inequality holds, if any."""

    hit: bool
    step_index: Optional[int] = None


def first_hit_steps(prices: np.ndarray, times: np.ndarray, terms: LoanTerms, rates: RateSet) -> np.ndarray:
    """Vectorised liquidation step per path.

    Parameters
    ----------
    prices : array, shape (n_paths, n_times) or (n_times,)
        Price paths aligned to ``times``.
    times : array, shape (n_times,)

    Returns
    -------
    array of int, shape (n_paths,)
        First index ``k`` with ``theta P_k e^{r_cE t_k} <= theta0 P0 e^{r_bD t_k}``,
        or ``n_times`` (one past the end) for paths that never trigger.
    """
    prices = np.atleast_2d(prices)
    if prices.shape[1] != times.shape[0]:
        raise ParameterError("price series not aligned to the time grid")
    # Compare theta * P * e^{(r_cE - r_bD) t} against theta0 * P0 to avoid
    # overflow-prone separate exponentials.
    lhs = terms.theta * prices * np.exp((rates.r_cE - rates.r_bD) * times)
    hit_mask = lhs <= terms.theta0 * terms.p0
    any_hit = hit_mask.any(axis=1)
    first = np.argmax(hit_mask, axis=1)
    return np.where(any_hit, first, times.shape[0])


def liquidation_time(path: np.ndarray, times: np.ndarray, terms: LoanTerms, rates: RateSet) -> LiquidationResult:
    """Liquidation time of a single path (discrete monitoring, grid times only)."""
    path = np.asarray(path, dtype=float)
    if path.ndim != 1 or path.size == 0:
        raise ParameterError("path must be a non-empty 1-d price series")
    step = int(first_hit_steps(path, np.asarray(times, dtype=float), terms, rates)[0])
    if step >= path.size:
        return LiquidationResult(hit=False)
    return LiquidationResult(hit=True, step_index=step)


def payoff(t: float, p_t: float, terms: LoanTerms, rates: RateSet, pre_barrier: bool) -> float:
    """Borrower claim value at time ``t``: collateral leg minus debt leg, zero once knocked out."""
    if not pre_barrier:
        return 0.0
    return p_t * math.exp(rates.r_cE * t) - terms.theta0 * terms.p0 * math.exp(rates.r_bD * t)


def payoff_matrix(
    prices: np.ndarray,
    times: np.ndarray,
    terms: LoanTerms,
    rates: RateSet,
    hit_steps: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Payoff ``psi(t_k, P_k)`` per path and grid time, zero at and after the hit step."""
    prices = np.atleast_2d(prices)
    if hit_steps is None:
        hit_steps = first_hit_steps(prices, times, terms, rates)
    psi = prices * np.exp(rates.r_cE * times) - terms.theta0 * terms.p0 * np.exp(rates.r_bD * times)
    alive = np.arange(times.shape[0]) < hit_steps[:, None]
    return np.where(alive, psi, 0.0)


def protocol_covered_payoff(t: float, terms: LoanTerms, rates: RateSet) -> float:
    """Pre-liquidation protocol leg ``theta0 P0 e^{r_bD t}``; independent of the spot price."""
    return terms.theta0 * terms.p0 * math.exp(rates.r_bD * t)
