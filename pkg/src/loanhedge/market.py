"""Price-path simulation for the collateral asset.

The collateral (ETH, quoted in the USDC numeraire) follows a geometric
Brownian motion with constant drift and volatility.  Two discretisations are
supported on a uniform grid with step ``dt``:

* exact lognormal:   ``P' = P * exp((mu - sigma^2/2) dt + sigma sqrt(dt) xi)``
* Euler-Maruyama:    ``P' = P + mu P dt + sigma P sqrt(dt) xi``

with ``xi`` standard normal.  Under the exact scheme with the risk-neutral
drift ``r_cD - r_cE`` the dividend-adjusted discounted price
``exp((r_cE - r_cD) t) P_t`` is a discrete-time martingale, which the tests
exercise directly.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .contract import RateSet
from .errors import ParameterError
from .randomness import make_generator

__all__ = [
    "Scheme",
    "GbmParams",
    "TimeGrid",
    "PathBatch",
    "MeasureChange",
    "simulate_paths",
    "risk_neutral_drift",
]


class Scheme(enum.Enum):
    """Discretisation scheme for the price process."""

    EXACT_LOGNORMAL = "exact_lognormal"
    EULER_MARUYAMA = "euler_maruyama"


@dataclass(frozen=True)
class GbmParams:
    """Geometric Brownian motion parameters.

    Parameters
    ----------
    mu : float
        Drift per year.
    sigma : float
        Volatility per sqrt-year; must be strictly positive.
    scheme : Scheme
        Step formula used by :func:`simulate_paths`.
    """

    mu: float
    sigma: float
    scheme: Scheme = Scheme.EXACT_LOGNORMAL

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ParameterError(f"sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid ``{k dt : k = 0..n_steps}`` in years."""

    dt: float
    n_steps: int

    def __post_init__(self) -> None:
        if not self.dt > 0.0:
            raise ParameterError(f"dt must be > 0, got {self.dt}")
        if self.n_steps < 1:
            raise ParameterError(f"n_steps must be >= 1, got {self.n_steps}")

    @classmethod
    def from_horizon(cls, horizon: float, n_steps: int) -> "TimeGrid":
        """Grid covering ``[0, horizon]`` with ``n_steps`` equal steps."""
        if not horizon > 0.0:
            raise ParameterError(f"horizon must be > 0, got {horizon}")
        return cls(dt=horizon / n_steps, n_steps=n_steps)

    @property
    def times(self) -> np.ndarray:
        """Vector of grid times, ``times[0] == 0``, strictly increasing."""
        return np.arange(self.n_steps + 1) * self.dt

    @property
    def horizon(self) -> float:
        return self.n_steps * self.dt


@dataclass(frozen=True)
class PathBatch:
    """A batch of simulated price paths on a common grid.

    ``prices`` has shape ``(n_paths, n_steps + 1)`` with ``prices[:, 0]`` equal
    to the initial price.  The array is marked read-only; a batch is immutable
    after construction.
    """

    grid: TimeGrid
    prices: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        if self.prices.ndim != 2 or self.prices.shape[1] != self.grid.n_steps + 1:
            raise ParameterError(
                f"prices shape {self.prices.shape} does not match grid with "
                f"{self.grid.n_steps} steps"
            )
        self.prices.setflags(write=False)

    @property
    def n_paths(self) -> int:
        return self.prices.shape[0]

    @property
    def p0(self) -> float:
        return float(self.prices[0, 0])

    def to_csv(self, path: str) -> None:
        """Dump the batch path-major: header row of grid times, one row per path."""
        header = ",".join(repr(float(t)) for t in self.grid.times)
        np.savetxt(path, self.prices, delimiter=",", header=header, comments="")


@dataclass(frozen=True)
class MeasureChange:
    """Market price of risk ``nu = (mu + r_cE - r_cD) / sigma`` of the measure change."""

    nu: float


def simulate_paths(
    params: GbmParams,
    grid: TimeGrid,
    p0: float,
    n_paths: int,
    seed: int,
    stream: tuple[int, ...] = (),
) -> PathBatch:
    """Simulate independent GBM paths.

    Identical ``(seed, stream)`` always produces a bit-identical batch.
    Thread-safe when concurrent callers use distinct streams or seeds.

    Raises
    ------
    ParameterError
        If ``p0 <= 0`` or ``n_paths < 1`` (``sigma``/``dt`` are validated by
        their owning dataclasses).
    """
    if not p0 > 0.0:
        raise ParameterError(f"p0 must be > 0, got {p0}")
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths}")

    rng = make_generator(seed, stream)
    xi = rng.standard_normal((n_paths, grid.n_steps))
    sqdt = np.sqrt(grid.dt)

    if params.scheme is Scheme.EXACT_LOGNORMAL:
        log_increments = (params.mu - 0.5 * params.sigma**2) * grid.dt + params.sigma * sqdt * xi
        log_rel = np.cumsum(log_increments, axis=1)
        prices = np.empty((n_paths, grid.n_steps + 1))
        prices[:, 0] = p0
        prices[:, 1:] = p0 * np.exp(log_rel)
    elif params.scheme is Scheme.EULER_MARUYAMA:
        prices = np.empty((n_paths, grid.n_steps + 1))
        prices[:, 0] = p0
        growth = 1.0 + params.mu * grid.dt
        for k in range(grid.n_steps):
            prices[:, k + 1] = prices[:, k] * (growth + params.sigma * sqdt * xi[:, k])
    else:  # pragma: no cover - enum is exhaustive
        raise ParameterError(f"unknown scheme {params.scheme}")

    return PathBatch(grid=grid, prices=prices, seed=seed)


def risk_neutral_drift(params: GbmParams, rates: RateSet) -> tuple[GbmParams, MeasureChange]:
    """Drift replacement making the dividend-adjusted discounted price a martingale.

    Returns the parameters with drift ``r_cD - r_cE`` (same sigma and scheme)
    together with the market price of risk ``nu = (mu + r_cE - r_cD) / sigma``.
    """
    nu = (params.mu + rates.r_cE - rates.r_cD) / params.sigma
    q_params = GbmParams(mu=rates.r_cD - rates.r_cE, sigma=params.sigma, scheme=params.scheme)
    return q_params, MeasureChange(nu=nu)
