"""Hedging policies: delta hedge and the trainable recurrent policy.

The delta hedge holds ``e^{r_cE t}`` ETH before liquidation and closes to
zero after it.  The neural policy is a small recurrent cell
``pi_t = mlp(P_t / price_scale, pi_{t-dt} / position_scale)`` trained by
backpropagation through the unrolled wealth recursion to minimise

    mean over paths of  sum_t ( psi(t, P_t) - (V_t - C_t) )^2

jointly over the network weights and the initial wealth ``v0``.  The price,
the payoff, the fee and ``v0`` are all divided by ``P0`` during training (the
recursion is positively homogeneous, so this is exact) and mapped back
afterwards.  Training uses the smooth cost surrogate; evaluation uses hard
costs.

Inference (:func:`policy_eval`, :class:`NeuralStrategy`) is a plain numpy
forward pass; torch is imported only inside the training entry points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from .contract import LoanTerms, RateSet, payoff_matrix
from .errors import (
    GradientCheckError,
    NumericsError,
    ParameterError,
    TrainingDivergedError,
)
from .market import GbmParams, PathBatch, Scheme, TimeGrid, simulate_paths
from .randomness import make_generator
from .wealth import CostModel

__all__ = [
    "Strategy",
    "DeltaStrategy",
    "ConstantStrategy",
    "NeuralStrategy",
    "PolicyParams",
    "TrainConfig",
    "TrainingLog",
    "delta_position",
    "policy_eval",
    "initial_policy_params",
    "train_deep_hedge",
    "gradient_check",
]

POLICY_FORMAT_VERSION = 1

_ACTIVATIONS = {
    "tanh": (np.tanh, 1.0),
    "sigmoid": (lambda x: 1.0 / (1.0 + np.exp(-x)), 0.25),
}


@runtime_checkable
class Strategy(Protocol):
    """A hedging policy queried once per grid step, vectorised over paths."""

    def positions(
        self,
        step: int,
        t: float,
        prices: np.ndarray,
        prev_positions: np.ndarray,
        pre_barrier: np.ndarray,
    ) -> np.ndarray:
        """Positions to hold over ``[t, t + dt)`` given current state."""
        ...  # pragma: no cover


def delta_position(t: float, rates: RateSet) -> float:
    """Pre-liquidation delta of the loan payoff, ``e^{r_cE t}``; price-independent."""
    return math.exp(rates.r_cE * t)


@dataclass(frozen=True)
class DeltaStrategy:
    """Closed-form delta hedge; position is closed to zero after the barrier."""

    rates: RateSet

    def positions(self, step, t, prices, prev_positions, pre_barrier):
        return np.where(pre_barrier, delta_position(t, self.rates), 0.0)


@dataclass(frozen=True)
class ConstantStrategy:
    """Hold a constant position on every path at every step."""

    value: float

    def positions(self, step, t, prices, prev_positions, pre_barrier):
        return np.full(prices.shape[0], self.value)


@dataclass
class PolicyParams:
    """Recurrent-cell weights as one flat vector plus the trained initial wealth.

    ``layer_sizes`` records the MLP shape (input 2, hidden layers, output 1);
    ``phi`` concatenates ``W`` (row-major, shape in x out) then ``b`` for each
    layer.  ``v0`` is in numeraire units.
    """

    layer_sizes: tuple[int, ...]
    activation: str
    phi: np.ndarray
    v0: float
    price_scale: float = 1.0
    position_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.activation not in _ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if len(self.layer_sizes) < 2 or self.layer_sizes[0] != 2 or self.layer_sizes[-1] != 1:
            raise ParameterError(f"layer_sizes must run 2 -> ... -> 1, got {self.layer_sizes}")
        self.phi = np.asarray(self.phi, dtype=np.float64).ravel()
        expected = sum(
            fan_in * fan_out + fan_out
            for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:])
        )
        if self.phi.size != expected:
            raise ParameterError(
                f"phi has {self.phi.size} entries, architecture {self.layer_sizes} needs {expected}"
            )
        if not math.isfinite(self.v0):
            raise ParameterError("v0 must be finite")

    @property
    def n_params(self) -> int:
        return self.phi.size

    def unpack(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-layer ``(W, b)`` views into the flat vector."""
        layers = []
        k = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.phi[k : k + fan_in * fan_out].reshape(fan_in, fan_out)
            k += fan_in * fan_out
            b = self.phi[k : k + fan_out]
            k += fan_out
            layers.append((w, b))
        return layers

    @classmethod
    def pack(
        cls,
        layers: Sequence[tuple[np.ndarray, np.ndarray]],
        v0: float,
        activation: str = "tanh",
        price_scale: float = 1.0,
        position_scale: float = 1.0,
    ) -> "PolicyParams":
        sizes = (layers[0][0].shape[0],) + tuple(w.shape[1] for w, _ in layers)
        flat = np.concatenate([np.concatenate([w.ravel(), b.ravel()]) for w, b in layers])
        return cls(
            layer_sizes=sizes,
            activation=activation,
            phi=flat,
            v0=v0,
            price_scale=price_scale,
            position_scale=position_scale,
        )

    def save(self, prefix: str) -> None:
        """Write ``<prefix>.bin`` (raw little-endian float64) and ``<prefix>.json``."""
        self.phi.astype("<f8").tofile(prefix + ".bin")
        desc = {
            "format_version": POLICY_FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "activation": self.activation,
            "v0": self.v0,
            "price_scale": self.price_scale,
            "position_scale": self.position_scale,
            "dtype": "<f8",
            "n_params": int(self.n_params),
        }
        with open(prefix + ".json", "w") as fh:
            json.dump(desc, fh, indent=2, sort_keys=True)

    @classmethod
    def load(cls, prefix: str) -> "PolicyParams":
        with open(prefix + ".json") as fh:
            desc = json.load(fh)
        if desc.get("format_version") != POLICY_FORMAT_VERSION:
            raise ParameterError(f"unsupported policy format {desc.get('format_version')}")
        phi = np.fromfile(prefix + ".bin", dtype=desc["dtype"])
        return cls(
            layer_sizes=tuple(desc["layer_sizes"]),
            activation=desc["activation"],
            phi=phi,
            v0=desc["v0"],
            price_scale=desc["price_scale"],
            position_scale=desc["position_scale"],
        )


def policy_eval(params: PolicyParams, p_t, pi_prev):
    """Deterministic forward pass of the recurrent cell.

    ``p_t`` is the raw price in numeraire units; the cell applies the input
    normalisation recorded in ``params``.  Accepts scalars or equal-length
    arrays; same params and inputs give bit-identical output.
    """
    scalar = np.isscalar(p_t) and np.isscalar(pi_prev)
    x = np.stack(
        [
            np.atleast_1d(np.asarray(p_t, dtype=np.float64)) / params.price_scale,
            np.atleast_1d(np.asarray(pi_prev, dtype=np.float64)) / params.position_scale,
        ],
        axis=1,
    )
    if x.shape[1] != params.layer_sizes[0]:
        raise ParameterError("input width does not match the policy architecture")
    act, _ = _ACTIVATIONS[params.activation]
    layers = params.unpack()
    for w, b in layers[:-1]:
        x = act(x @ w + b)
    w, b = layers[-1]
    out = (x @ w + b)[:, 0]
    return float(out[0]) if scalar else out


def policy_lipschitz_bound(params: PolicyParams) -> float:
    """Product of layer spectral norms times activation Lipschitz constants."""
    _, act_lip = _ACTIVATIONS[params.activation]
    layers = params.unpack()
    bound = 1.0
    for i, (w, _) in enumerate(layers):
        bound *= float(np.linalg.norm(w, 2))
        if i < len(layers) - 1:
            bound *= act_lip
    return bound


@dataclass(frozen=True)
class NeuralStrategy:
    """Evaluation wrapper for a trained policy.

    ``trade_band`` is an execution filter: a rebalance is executed only when
    the cell's output differs from the standing position by more than the
    band.  With flat per-trade fees, dust rebalances are never rational; the
    band suppresses them without touching the cell itself.  ``band = 0``
    executes the raw cell output every step.
    """

    params: PolicyParams
    trade_band: float = 0.0

    def positions(self, step, t, prices, prev_positions, pre_barrier):
        raw = policy_eval(self.params, prices, prev_positions)
        if self.trade_band > 0.0:
            trade = np.abs(raw - prev_positions) > self.trade_band
            return np.where(trade, raw, prev_positions)
        return raw


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of :func:`train_deep_hedge`.

    ``price_scale`` defaults to the loan's ``P0``; positions enter the cell
    unscaled by default.  ``dtype`` controls the training precision; gradient
    checks always run in float64.
    """

    n_epochs: int = 80
    batch_paths: int = 1024
    learning_rate: float = 1e-3
    lr_schedule: str = "cosine"
    grad_clip: float = 10.0
    hidden_width: int = 32
    n_hidden_layers: int = 2
    activation: str = "tanh"
    price_scale: Optional[float] = None
    position_scale: float = 1.0
    seed: int = 0
    dtype: str = "float32"
    check_gradients: bool = False

    def __post_init__(self) -> None:
        if self.n_epochs < 1 or self.batch_paths < 1 or self.hidden_width < 1 or self.n_hidden_layers < 1:
            raise ParameterError("counts in TrainConfig must be >= 1")
        if not self.learning_rate > 0.0:
            raise ParameterError("learning_rate must be > 0")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ParameterError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.activation not in _ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.dtype not in ("float32", "float64"):
            raise ParameterError(f"dtype must be float32 or float64, got {self.dtype!r}")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (2,) + (self.hidden_width,) * self.n_hidden_layers + (1,)


@dataclass
class TrainingLog:
    """Per-epoch training record plus the final smooth-vs-hard cost gap.

    Losses are in premium-normalised units (all cash quantities divided by
    ``P0``); ``v0`` is reported in numeraire units.
    """

    epoch: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    v0: np.ndarray
    final_loss_smooth: float
    final_loss_hard: float

    @property
    def cost_gap(self) -> float:
        """Hard-cost minus smooth-cost final loss (surrogate optimism)."""
        return self.final_loss_hard - self.final_loss_smooth

    def to_csv(self, path: str) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,loss,grad_norm,v0\n")
            for e, l, g, v in zip(self.epoch, self.loss, self.grad_norm, self.v0):
                fh.write(f"{int(e)},{l!r},{g!r},{v!r}\n")


def initial_policy_params(config: TrainConfig, terms: LoanTerms) -> PolicyParams:
    """Deterministic Xavier-uniform initialisation; ``v0`` starts at the premium."""
    rng = make_generator(config.seed, (101,))
    layers = []
    for fan_in, fan_out in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append((w, np.zeros(fan_out)))
    return PolicyParams.pack(
        layers,
        v0=terms.premium,
        activation=config.activation,
        price_scale=config.price_scale if config.price_scale is not None else terms.p0,
        position_scale=config.position_scale,
    )


# ---------------------------------------------------------------------------
# Training (torch imported lazily)
# ---------------------------------------------------------------------------


def _torch_modules():
    import torch

    return torch


def _unrolled_loss(torch, prices_n, psi_n, leaves, config: TrainConfig, rates: RateSet,
                   cost: CostModel, fee_n: float, dt: float, smooth: bool):
    """Loss of the unrolled recursion in normalised units.

    ``prices_n``/``psi_n``: tensors (n_paths, n_steps+1) divided by P0;
    ``leaves``: [W1, b1, ..., v0]; returns mean over paths of the summed
    squared hedging error.
    """
    act = torch.tanh if config.activation == "tanh" else torch.sigmoid
    n_steps = prices_n.shape[1] - 1
    n_layer = len(config.layer_sizes) - 1
    weights = [(leaves[2 * i], leaves[2 * i + 1]) for i in range(n_layer)]
    v0 = leaves[-1]
    inv_pos = 1.0 / config.position_scale

    pi_prev = torch.zeros_like(prices_n[:, 0])
    v = v0.expand_as(pi_prev)
    c = torch.zeros_like(pi_prev)
    loss = None
    for k in range(n_steps + 1):
        x = torch.stack([prices_n[:, k], pi_prev * inv_pos], dim=1)
        for w, b in weights[:-1]:
            x = act(x @ w + b)
        w, b = weights[-1]
        pi = (x @ w + b)[:, 0]
        dpi = pi - pi_prev
        if smooth:
            c = c + fee_n * (1.0 - torch.exp(-torch.abs(dpi) / cost.smooth_kappa))
        else:
            c = c + fee_n * (torch.abs(dpi) > cost.rebalance_epsilon).to(dpi.dtype)
        term = (psi_n[:, k] - (v - c)) ** 2
        loss = term if loss is None else loss + term
        if k == n_steps:
            break
        cash = v - pi * prices_n[:, k]
        p_next = prices_n[:, k + 1]
        v = (
            (1.0 + rates.r_cD * dt) * torch.relu(cash)
            - (1.0 + rates.r_bD * dt) * torch.relu(-cash)
            + (1.0 + rates.r_cE * dt) * torch.relu(pi) * p_next
            - (1.0 + rates.r_bE * dt) * torch.relu(-pi) * p_next
        )
        pi_prev = pi
    return loss.mean()


def _loss_term_count(grid: TimeGrid) -> int:
    return grid.n_steps + 1


def train_deep_hedge(
    batch: PathBatch,
    terms: LoanTerms,
    rates: RateSet,
    cost: CostModel,
    config: TrainConfig,
) -> tuple[PolicyParams, TrainingLog]:
    """Minimise the summed squared hedging error over weights and ``v0``.

    Gradients flow through the full unrolled wealth recursion across all grid
    steps.  Training costs use the smooth surrogate; the returned log also
    reports the loss under hard costs for the final parameters.  Identical
    ``config.seed`` and batch give an identical log.

    Raises
    ------
    TrainingDivergedError
        If the loss becomes non-finite.
    GradientCheckError
        If ``config.check_gradients`` is set and the micro-instance check fails.
    """
    if config.check_gradients:
        gradient_check(terms, rates, cost, config)

    torch = _torch_modules()
    dtype = torch.float32 if config.dtype == "float32" else torch.float64

    p0 = terms.p0
    init = initial_policy_params(config, terms)
    times = batch.grid.times
    psi = payoff_matrix(batch.prices, times, terms, rates)
    prices_n = torch.as_tensor(batch.prices / p0, dtype=dtype)
    psi_n = torch.as_tensor(psi / p0, dtype=dtype)
    fee_n = cost.fee_per_rebalance / p0
    dt = batch.grid.dt

    leaves = []
    for w, b in init.unpack():
        leaves.append(torch.tensor(w, dtype=dtype, requires_grad=True))
        leaves.append(torch.tensor(b, dtype=dtype, requires_grad=True))
    leaves.append(torch.tensor([init.v0 / p0], dtype=dtype, requires_grad=True))

    optimizer = torch.optim.Adam(leaves, lr=config.learning_rate)
    if config.lr_schedule == "cosine":
        scheduler = torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=config.n_epochs)
    else:
        scheduler = None

    shuffle_rng = make_generator(config.seed, (202,))
    n_paths = batch.n_paths
    ep_loss = np.empty(config.n_epochs)
    ep_gnorm = np.empty(config.n_epochs)
    ep_v0 = np.empty(config.n_epochs)

    for epoch in range(config.n_epochs):
        order = shuffle_rng.permutation(n_paths)
        losses = []
        gnorms = []
        for start in range(0, n_paths, config.batch_paths):
            idx = torch.as_tensor(order[start : start + config.batch_paths])
            optimizer.zero_grad(set_to_none=True)
            loss = _unrolled_loss(
                torch, prices_n[idx], psi_n[idx], leaves, config, rates, cost, fee_n, dt, smooth=True
            )
            if not torch.isfinite(loss):
                raise TrainingDivergedError(epoch)
            loss.backward()
            gnorm = torch.nn.utils.clip_grad_norm_(leaves, config.grad_clip)
            optimizer.step()
            losses.append(float(loss.detach()))
            gnorms.append(float(gnorm))
        if scheduler is not None:
            scheduler.step()
        ep_loss[epoch] = float(np.mean(losses))
        ep_gnorm[epoch] = float(np.mean(gnorms))
        ep_v0[epoch] = float(leaves[-1].detach()) * p0

    with torch.no_grad():
        final_smooth = float(
            _unrolled_loss(torch, prices_n, psi_n, leaves, config, rates, cost, fee_n, dt, smooth=True)
        )
        final_hard = float(
            _unrolled_loss(torch, prices_n, psi_n, leaves, config, rates, cost, fee_n, dt, smooth=False)
        )

    n_layer = len(config.layer_sizes) - 1
    trained_layers = [
        (
            leaves[2 * i].detach().numpy().astype(np.float64),
            leaves[2 * i + 1].detach().numpy().astype(np.float64),
        )
        for i in range(n_layer)
    ]
    params = PolicyParams.pack(
        trained_layers,
        v0=float(leaves[-1].detach()) * p0,
        activation=config.activation,
        price_scale=init.price_scale,
        position_scale=init.position_scale,
    )
    log = TrainingLog(
        epoch=np.arange(1, config.n_epochs + 1),
        loss=ep_loss,
        grad_norm=ep_gnorm,
        v0=ep_v0,
        final_loss_smooth=final_smooth,
        final_loss_hard=final_hard,
    )
    return params, log


def gradient_check(
    terms: LoanTerms,
    rates: RateSet,
    cost: CostModel,
    config: TrainConfig,
    n_steps: int = 3,
    n_paths: int = 8,
    fd_step: float = 1e-5,
    tol: float = 1e-4,
) -> float:
    """Compare autograd gradients with central finite differences.

    Runs the unrolled loss on a float64 micro-instance (``n_steps`` grid
    steps, ``n_paths`` paths, random non-kink parameters) and checks every
    weight, bias and ``v0``.  Returns the worst relative error; raises
    :class:`GradientCheckError` beyond ``tol``.
    """
    torch = _torch_modules()
    grid = TimeGrid(dt=1.0 / 365.0, n_steps=n_steps)
    micro_terms = LoanTerms(
        theta0=terms.theta0, theta=terms.theta, p0=terms.p0, horizon=grid.horizon
    )
    gbm = GbmParams(mu=0.1, sigma=0.4, scheme=Scheme.EXACT_LOGNORMAL)
    batch = simulate_paths(gbm, grid, micro_terms.p0, n_paths, seed=config.seed, stream=(303,))
    psi = payoff_matrix(batch.prices, grid.times, micro_terms, rates)
    p0 = micro_terms.p0
    prices_n = torch.as_tensor(batch.prices / p0, dtype=torch.float64)
    psi_n = torch.as_tensor(psi / p0, dtype=torch.float64)
    fee_n = cost.fee_per_rebalance / p0

    rng = make_generator(config.seed, (404,))
    leaves = []
    for fan_in, fan_out in zip(config.layer_sizes[:-1], config.layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        b = rng.uniform(-0.1, 0.1, size=fan_out)
        leaves.append(torch.tensor(w, dtype=torch.float64, requires_grad=True))
        leaves.append(torch.tensor(b, dtype=torch.float64, requires_grad=True))
    leaves.append(
        torch.tensor([terms.premium / p0 + 0.01], dtype=torch.float64, requires_grad=True)
    )

    def loss_at() -> "object":
        return _unrolled_loss(
            torch, prices_n, psi_n, leaves, config, rates, cost, fee_n, grid.dt, smooth=True
        )

    loss = loss_at()
    loss.backward()
    analytic = [leaf.grad.detach().clone() for leaf in leaves]

    worst = 0.0
    g_scale = max(float(g.abs().max()) for g in analytic)
    with torch.no_grad():
        for leaf, grad in zip(leaves, analytic):
            flat = leaf.view(-1)
            gflat = grad.view(-1)
            for i in range(flat.shape[0]):
                orig = float(flat[i])
                flat[i] = orig + fd_step
                up = float(loss_at())
                flat[i] = orig - fd_step
                down = float(loss_at())
                flat[i] = orig
                fd = (up - down) / (2.0 * fd_step)
                a = float(gflat[i])
                if max(abs(a), abs(fd)) < 1e-7 * max(g_scale, 1e-12):
                    continue
                rel = abs(a - fd) / max(abs(a), abs(fd))
                worst = max(worst, rel)
    if worst > tol:
        raise GradientCheckError(
            f"gradient check failed: worst relative error {worst:.3e} > {tol:.1e}"
        )
    return worst
