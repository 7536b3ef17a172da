"""Nonlinear pricing drivers and the scaled-coordinate transform.

The wealth dynamics under rate spreads have drift generator

    f(t, y, z) = r_cD y - (r_bD - r_cD)(y - z/sigma)^-
                 + ((r_cE - r_cD + mu)/sigma) z - ((r_bE - r_cE)/sigma) z^-

(physical measure, drift ``mu``).  After the measure change removing the
drift, the backward generator is

    g(t, y, z) = -r_cD y + (r_bD - r_cD)(y - z/sigma)^- + ((r_bE - r_cE)/sigma) z^-

and in scaled coordinates

    g_bar(t, y, z) = (r_bD - r_cD) y + (r_bD - r_cD)(y - z/sigma)^-
                     + ((r_bE - r_cE)/sigma) z^-.

``g`` and ``g_bar`` are positively homogeneous in ``(y, z)``; with zero
spreads ``g_bar`` vanishes identically and pricing is linear.  These are
exposed as formula evaluators only (no time-stepping scheme ships).
"""

from __future__ import annotations

from dataclasses import dataclass

from .contract import LoanTerms, RateSet
from .errors import ParameterError

__all__ = [
    "DriverInput",
    "ScaledState",
    "driver_f",
    "driver_g",
    "driver_g_bar",
    "scale_state",
    "unscale_state",
]

import math


def _neg(x: float) -> float:
    """Negative part, ``x^- = -min(0, x) >= 0``."""
    return -min(0.0, x)


@dataclass(frozen=True)
class DriverInput:
    """Arguments of the drivers: time, wealth-like value, volatility loading."""

    t: float
    y: float
    z: float
    sigma_t: float
    rates: RateSet

    def __post_init__(self) -> None:
        if not self.sigma_t > 0.0:
            raise ParameterError(f"sigma_t must be > 0, got {self.sigma_t}")


@dataclass(frozen=True)
class ScaledState:
    """Scaled price / wealth / loading coordinates (unit initial price)."""

    s: float
    v_scaled: float
    z_scaled: float


def driver_f(inp: DriverInput, mu_t: float) -> float:
    """Forward drift generator under the physical measure with drift ``mu_t``."""
    r = inp.rates
    return (
        r.r_cD * inp.y
        - r.spread_d * _neg(inp.y - inp.z / inp.sigma_t)
        + ((r.r_cE - r.r_cD + mu_t) / inp.sigma_t) * inp.z
        - (r.spread_e / inp.sigma_t) * _neg(inp.z)
    )


def driver_g(inp: DriverInput) -> float:
    """Backward generator after the drift-removing measure change."""
    r = inp.rates
    return (
        -r.r_cD * inp.y
        + r.spread_d * _neg(inp.y - inp.z / inp.sigma_t)
        + (r.spread_e / inp.sigma_t) * _neg(inp.z)
    )


def driver_g_bar(inp: DriverInput) -> float:
    """Backward generator in scaled coordinates; identically zero without spreads."""
    r = inp.rates
    return (
        r.spread_d * inp.y
        + r.spread_d * _neg(inp.y - inp.z / inp.sigma_t)
        + (r.spread_e / inp.sigma_t) * _neg(inp.z)
    )


def scale_state(
    p_t: float, v: float, z: float, t: float, terms: LoanTerms, rates: RateSet
) -> ScaledState:
    """Map ``(P, V, Z)`` to the unit-start scaled coordinates.

    ``S = P e^{(r_cE - r_bD) t} / P0``, ``V`` and ``Z`` are discounted at the
    USDC borrow rate and divided by ``P0``.  In these coordinates the
    liquidation condition reads ``S <= theta0 / theta``.
    """
    disc = math.exp(-rates.r_bD * t) / terms.p0
    return ScaledState(
        s=p_t * math.exp(rates.r_cE * t) * disc,
        v_scaled=v * disc,
        z_scaled=z * disc,
    )


def unscale_state(state: ScaledState, t: float, terms: LoanTerms, rates: RateSet) -> tuple[float, float, float]:
    """Inverse of :func:`scale_state`; returns ``(p_t, v, z)``."""
    grow = math.exp(rates.r_bD * t) * terms.p0
    return (
        state.s * grow * math.exp(-rates.r_cE * t),
        state.v_scaled * grow,
        state.z_scaled * grow,
    )
