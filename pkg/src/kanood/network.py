"""Kolmogorov-Arnold network layers with activation capture and AdamW training."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .spline import SplineGrid, basis_eval, basis_grad

logger = logging.getLogger(__name__)

TASKS = ("classification", "constant", "regression")


class NumericalError(RuntimeError):
    pass


def silu(x):
    return x / (1.0 + np.exp(-x))


def silu_grad(x):
    s = 1.0 / (1.0 + np.exp(-x))
    return s * (1.0 + x * (1.0 - s))


@dataclass
class KanLayer:
    """One KAN layer: ``phi[p, q](x) = w[p, q] * silu(x) + sum_i c[p, q, i] B_i(x)``."""

    grid: SplineGrid
    coeffs: np.ndarray  # (n_in, n_out, n_basis)
    base_weights: np.ndarray  # (n_in, n_out)

    @property
    def n_in(self) -> int:
        return self.coeffs.shape[0]

    @property
    def n_out(self) -> int:
        return self.coeffs.shape[1]

    def components(self, x: np.ndarray):
        """Return ``(spline, residual)`` activations, each shaped (batch, n_in, n_out)."""
        xc = self.grid.clamp(x)
        bases = basis_eval(self.grid, xc)
        spline = np.einsum("bpi,pqi->bpq", bases, self.coeffs)
        residual = silu(xc)[:, :, None] * self.base_weights[None]
        return spline, residual


@dataclass
class ActivationRecord:
    """Per-layer activation outputs captured during a forward pass.

    ``spline[l]`` and ``residual[l]`` have shape (batch, n_in, n_out) for layer
    ``l``; their sum is the full edge activation.
    """

    spline: list[np.ndarray] = field(default_factory=list)
    residual: list[np.ndarray] = field(default_factory=list)


@dataclass
class KanNetwork:
    layers: list[KanLayer]
    init_seed: int = 0
    init_std: float = 0.1

    @property
    def shape(self) -> list[int]:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def grid(self) -> SplineGrid:
        return self.layers[0].grid

    def forward(self, x) -> tuple[np.ndarray, ActivationRecord]:
        """Run the network on ``x`` (one vector or a (batch, n_in) matrix)."""
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = np.atleast_2d(x)
        if h.ndim != 2 or h.shape[1] != self.layers[0].n_in:
            raise ValueError(
                f"expected input with {self.layers[0].n_in} features, got shape {x.shape}"
            )
        if not np.all(np.isfinite(h)):
            raise ValueError("network input contains non-finite values")
        rec = ActivationRecord()
        for layer in self.layers:
            spline, residual = layer.components(h)
            rec.spline.append(spline)
            rec.residual.append(residual)
            h = (spline + residual).sum(axis=1)
        return (h[0] if single else h), rec

    def __call__(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def parameters(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in (layer.coeffs, layer.base_weights)]


def init_network(
    shape: Sequence[int],
    grid_size: int = 5,
    order: int = 3,
    domain: tuple[float, float] = (-1.0, 1.0),
    seed: int = 0,
    init_std: float = 0.1,
) -> KanNetwork:
    """Create a network with N(0, init_std) spline coefficients and unit base weights."""
    shape = list(shape)
    if len(shape) < 2 or any(int(s) != s or s < 1 for s in shape):
        raise ValueError(f"shape needs >= 2 positive integer layer sizes, got {shape}")
    grid = SplineGrid(float(domain[0]), float(domain[1]), int(grid_size), int(order))
    rng = np.random.default_rng(seed)
    layers = []
    for n_in, n_out in zip(shape[:-1], shape[1:]):
        coeffs = rng.normal(0.0, init_std, size=(n_in, n_out, grid.n_basis))
        layers.append(KanLayer(grid, coeffs, np.ones((n_in, n_out))))
    return KanNetwork(layers, init_seed=int(seed), init_std=float(init_std))


def clone_weights(net: KanNetwork) -> KanNetwork:
    return copy.deepcopy(net)


@dataclass
class TrainConfig:
    """Training hyperparameters; ``task`` is one of classification, constant, regression."""

    learning_rate: float = 0.1
    epochs: int = 1
    batch_size: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    task: str = "regression"
    constant_value: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be an integer >= 1, got {self.epochs}")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError(f"batch_size must be positive, got {self.batch_size}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")

    def resolved_batch_size(self, n: int) -> int:
        if self.batch_size is not None:
            return int(self.batch_size)
        return n if n <= 4096 else 4096


def _targets(data, cfg: TrainConfig, n_out: int) -> np.ndarray:
    n = len(data.features)
    if cfg.task == "classification":
        if data.labels is None:
            raise ValueError("classification training requires labels")
        labels = np.asarray(data.labels, dtype=np.int64)
        if labels.min() < 0 or labels.max() >= n_out:
            raise ValueError(f"labels must lie in [0, {n_out}) for a {n_out}-output network")
        return labels
    if cfg.task == "constant":
        return np.full((n, n_out), float(cfg.constant_value))
    if data.targets is None:
        raise ValueError("regression training requires targets")
    t = np.asarray(data.targets, dtype=np.float64)
    return t.reshape(n, -1) if t.ndim > 1 else np.repeat(t[:, None], n_out, axis=1)


def loss_and_output_grad(out: np.ndarray, target: np.ndarray, task: str):
    """Mean loss over the batch and its gradient with respect to ``out``."""
    n = out.shape[0]
    if task == "classification":
        z = out - out.max(axis=1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
        loss = -logp[np.arange(n), target].mean()
        grad = np.exp(logp)
        grad[np.arange(n), target] -= 1.0
        return loss, grad / n
    diff = out - target
    return np.mean(diff**2), 2.0 * diff / diff.size


def backprop(net: KanNetwork, x: np.ndarray, target: np.ndarray, task: str):
    """Loss and gradients for every parameter, ordered like ``net.parameters()``."""
    acts = []
    h = x
    for layer in net.layers:
        xc = layer.grid.clamp(h)
        bases = basis_eval(layer.grid, xc)
        acts.append((h, xc, bases))
        h = np.einsum("bpi,pqi->bq", bases, layer.coeffs) + silu(xc) @ layer.base_weights
    loss, g = loss_and_output_grad(h, target, task)
    grads = []
    for layer, (h_in, xc, bases) in zip(reversed(net.layers), reversed(acts)):
        g_coeffs = np.einsum("bq,bpi->pqi", g, bases)
        g_base = silu(xc).T @ g
        grads.append(g_base)
        grads.append(g_coeffs)
        if layer is not net.layers[0]:
            dphi = silu_grad(xc)[:, :, None] * layer.base_weights[None] + np.einsum(
                "bpi,pqi->bpq", basis_grad(layer.grid, h_in), layer.coeffs
            )
            inside = (h_in >= layer.grid.domain_min) & (h_in <= layer.grid.domain_max)
            g = np.einsum("bq,bpq->bp", g, dphi) * inside
    return loss, grads[::-1]


def train(net: KanNetwork, data, cfg: TrainConfig, history: list | None = None) -> KanNetwork:
    """Train a copy of ``net`` on ``data`` with minibatch AdamW.

    The input network is left untouched. If ``history`` is given, the mean
    training loss of each epoch is appended to it.
    """
    x = np.asarray(data.features, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("training data must be a non-empty (n, d) matrix")
    if x.shape[1] != net.layers[0].n_in:
        raise ValueError(
            f"data has {x.shape[1]} features but the network expects {net.layers[0].n_in}"
        )
    target = _targets(data, cfg, net.layers[-1].n_out)
    net = clone_weights(net)
    params = net.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    rng = np.random.default_rng(cfg.rng_seed)
    n = len(x)
    bs = cfg.resolved_batch_size(n)
    lr, b1, b2 = cfg.learning_rate, cfg.beta1, cfg.beta2
    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            loss, grads = backprop(net, x[idx], target[idx], cfg.task)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite training loss at epoch {epoch}, step {step}; "
                    "try a smaller learning rate or rescale the input features"
                )
            total += loss * len(idx)
            step += 1
            c1 = 1.0 - b1**step
            c2 = 1.0 - b2**step
            for p, g, mi, vi in zip(params, grads, m, v):
                p *= 1.0 - lr * cfg.weight_decay
                mi *= b1
                mi += (1.0 - b1) * g
                vi *= b2
                vi += (1.0 - b2) * g * g
                p -= lr * (mi / c1) / (np.sqrt(vi / c2) + cfg.eps)
        if history is not None:
            history.append(total / n)
        logger.debug("epoch %d loss %.6g", epoch, total / n)
    return net


# -- serialization ---------------------------------------------------------


def network_to_dict(net: KanNetwork, encode) -> dict:
    g = net.grid
    return {
        "shape": net.shape,
        "grid": {
            "domain_min": g.domain_min,
            "domain_max": g.domain_max,
            "grid_size": g.grid_size,
            "order": g.order,
        },
        "init_seed": net.init_seed,
        "init_std": net.init_std,
        "layers": [
            {"coeffs": encode(layer.coeffs), "base_weights": encode(layer.base_weights)}
            for layer in net.layers
        ],
    }


def network_from_dict(d: dict, decode) -> KanNetwork:
    grid = SplineGrid(**d["grid"])
    layers = [
        KanLayer(grid, decode(ld["coeffs"]), decode(ld["base_weights"])) for ld in d["layers"]
    ]
    net = KanNetwork(layers, init_seed=d["init_seed"], init_std=d["init_std"])
    if net.shape != list(d["shape"]):
        raise ValueError(f"network shape {net.shape} does not match header {d['shape']}")
    return net
