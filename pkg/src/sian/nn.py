"""Multilayer perceptrons with manual backprop, Adagrad, and task losses.

One Mlp type serves both roles in the pipeline: the wide reference network
that the interaction detector probes, and the small shape subnetworks inside
the additive model.  Hidden layers use ReLU, the output layer is linear with
width 1.  Regression pairs with the identity link and squared error;
binary classification pairs with the logit link, so the network emits logits
and the loss is a numerically stable binary cross-entropy.

:func:`mlp_forward` runs on the strict-order :func:`~sian.tensor.matmul`
kernel and is bit-identical to a scalar reference loop.  The training helpers
(:func:`fast_forward`, :func:`train_mlp`) use BLAS products instead, since
gradient paths carry a finite-difference tolerance rather than an
exact-equality contract, and training is where the arithmetic volume lives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    ShapeMismatchError,
    StaleCacheError,
    TrainingDivergedError,
)
from .tensor import Matrix, Rng, matmul

__all__ = [
    "TaskHead",
    "REGRESSION",
    "CLASSIFICATION",
    "Mlp",
    "init_mlp",
    "mlp_forward",
    "mlp_forward_cached",
    "fast_forward",
    "mlp_backward",
    "ForwardCache",
    "AdagradState",
    "adagrad_step",
    "mse_loss",
    "bce_logits_loss",
    "loss",
    "l1_penalty",
    "l1_subgradient",
    "TrainConfig",
    "TrainResult",
    "train_mlp",
]


@dataclass(frozen=True)
class TaskHead:
    """Pairing of prediction target kind and link function.

    Regression uses the identity link with squared-error loss; binary
    classification uses the inverse-sigmoid (logit) link, i.e. the model's
    raw output is a logit and the loss is cross-entropy from logits.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("regression", "classification"):
            raise DomainError(f"unknown task head {self.kind!r}")

    @property
    def link(self) -> str:
        return "identity" if self.kind == "regression" else "logit"


REGRESSION = TaskHead("regression")
CLASSIFICATION = TaskHead("classification")


@dataclass
class Mlp:
    """Fully connected net: weights[l] has shape (fan_in, fan_out), output width 1."""

    weights: list[Matrix]
    biases: list[np.ndarray]

    def __post_init__(self):
        for l in range(len(self.weights) - 1):
            if self.weights[l].shape[1] != self.weights[l + 1].shape[0]:
                raise ShapeMismatchError(
                    f"layer {l} output width {self.weights[l].shape[1]} does not "
                    f"feed layer {l + 1} input width {self.weights[l + 1].shape[0]}"
                )
        if self.weights[-1].shape[1] != 1:
            raise ShapeMismatchError("output layer must have width 1")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[1],):
                raise ShapeMismatchError(f"bias {l} shape {b.shape} mismatches weight {w.shape}")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        """Flat parameter list, weights and biases interleaved per layer."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(widths, rng: Rng) -> Mlp:
    """Glorot-uniform weights in +-sqrt(6/(fan_in+fan_out)), zero biases.

    ``widths`` is the full sequence (input, hidden..., output); the output
    width must be 1.
    """
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise ShapeMismatchError("need at least input and output widths")
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def _check_batch(net: Mlp, batch: Matrix) -> None:
    if batch.ndim != 2:
        raise ShapeMismatchError(f"batch must be 2-D, got {batch.ndim}-D")
    if batch.shape[1] != net.weights[0].shape[0]:
        raise ShapeMismatchError(
            f"batch width {batch.shape[1]} != input width {net.weights[0].shape[0]}"
        )


def mlp_forward(net: Mlp, batch: Matrix) -> np.ndarray:
    """Strict-order forward pass; returns a length-n prediction vector.

    Per layer: z = matmul(x, W) + b (bias added after the full product),
    ReLU on hidden layers, linear output.  Bit-identical to a scalar loop
    that accumulates each unit's products in ascending input order and then
    adds the bias.
    """
    _check_batch(net, batch)
    a = batch
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = matmul(a, w)
        np.add(z, b, out=z)
        a = np.maximum(z, 0.0) if l < last else z
    return a[:, 0]


@dataclass
class ForwardCache:
    """Activations recorded by a cached forward pass, consumed by backward."""

    net_id: int
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer
    masks: list[np.ndarray] = field(default_factory=list)  # ReLU pass-through masks
    n: int = 0


def _forward_cached(net: Mlp, batch: Matrix, product) -> tuple[np.ndarray, ForwardCache]:
    _check_batch(net, batch)
    cache = ForwardCache(net_id=id(net), n=batch.shape[0])
    a = batch
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        cache.inputs.append(a)
        z = product(a, w)
        np.add(z, b, out=z)
        if l < last:
            mask = z > 0.0
            cache.masks.append(mask)
            a = np.where(mask, z, 0.0)
        else:
            a = z
    return a[:, 0], cache


def mlp_forward_cached(net: Mlp, batch: Matrix) -> tuple[np.ndarray, ForwardCache]:
    """Strict-order forward that also records activations for backward."""
    return _forward_cached(net, batch, matmul)


def fast_forward(net: Mlp, batch: Matrix) -> np.ndarray:
    """BLAS-backed forward for bulk evaluation (training, detector probes).

    Same arithmetic as :func:`mlp_forward` up to floating-point summation
    order; not covered by the exact-equality contracts.
    """
    _check_batch(net, batch)
    a = batch
    last = net.n_layers - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = np.dot(a, w)
        np.add(z, b, out=z)
        a = np.maximum(z, 0.0) if l < last else z
    return a[:, 0]


def _fast_forward_cached(net: Mlp, batch: Matrix) -> tuple[np.ndarray, ForwardCache]:
    return _forward_cached(net, batch, np.dot)


@dataclass
class Grads:
    """Parameter gradients mirroring an Mlp's weight/bias lists."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out


def mlp_backward(net: Mlp, cache: ForwardCache, upstream: np.ndarray) -> Grads:
    """Backpropagate d(loss)/d(prediction) to every weight and bias.

    ``cache`` must come from a cached forward of the same net on the same
    batch; a missing or foreign cache raises :class:`StaleCacheError`.
    The ReLU subgradient at exactly 0 is taken as 0.
    """
    if cache is None:
        raise StaleCacheError("backward called without a cached forward")
    if cache.net_id != id(net):
        raise StaleCacheError("cache was recorded for a different net")
    if len(cache.inputs) != net.n_layers:
        raise StaleCacheError("cache does not cover every layer")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (cache.n,):
        raise StaleCacheError(
            f"upstream gradient has shape {upstream.shape}, cached batch had {cache.n} rows"
        )
    d_weights: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    d_biases: list[np.ndarray] = [None] * net.n_layers  # type: ignore[list-item]
    delta = upstream[:, None]
    for l in range(net.n_layers - 1, -1, -1):
        a = cache.inputs[l]
        d_weights[l] = np.dot(a.T, delta)
        d_biases[l] = delta.sum(axis=0)
        if l > 0:
            delta = np.dot(delta, net.weights[l].T)
            delta = delta * cache.masks[l - 1]
    return Grads(d_weights, d_biases)


class AdagradState:
    """Sum-of-squared-gradient accumulators plus the step-size constants."""

    def __init__(self, params: list[np.ndarray], lr: float = 5e-3, eps: float = 1e-10):
        self.lr = float(lr)
        self.eps = float(eps)
        self.accumulators = [np.zeros_like(np.asarray(p, dtype=np.float64)) for p in params]


def adagrad_step(
    params: list[np.ndarray], grads: list[np.ndarray], state: AdagradState
) -> tuple[list[np.ndarray], AdagradState]:
    """One Adagrad update, in place: G += g^2; w -= lr * g / (sqrt(G) + eps)."""
    if len(params) != len(grads) or len(params) != len(state.accumulators):
        raise ShapeMismatchError("params, grads, and accumulators differ in count")
    for p, g, acc in zip(params, grads, state.accumulators):
        if p.shape != g.shape or p.shape != acc.shape:
            raise ShapeMismatchError(
                f"parameter shape {p.shape}, gradient {g.shape}, accumulator {acc.shape}"
            )
        acc += g * g
        p -= state.lr * g / (np.sqrt(acc) + state.eps)
    return params, state


def mse_loss(preds: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its gradient w.r.t. predictions."""
    if len(preds) == 0:
        raise DomainError("empty batch")
    if preds.shape != targets.shape:
        raise ShapeMismatchError(f"{preds.shape} vs {targets.shape}")
    r = preds - targets
    return float(np.mean(r * r)), (2.0 / len(preds)) * r


def bce_logits_loss(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy from logits, in log-sum-exp form.

    Per sample: max(z, 0) - z*y + log(1 + exp(-|z|)), which equals
    -[y log sigma(z) + (1-y) log(1 - sigma(z))] without overflow for large |z|.
    """
    if len(logits) == 0:
        raise DomainError("empty batch")
    if logits.shape != targets.shape:
        raise ShapeMismatchError(f"{logits.shape} vs {targets.shape}")
    z, y = logits, targets
    per_sample = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    sig = np.empty_like(z)
    pos = z >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    sig[~pos] = ez / (1.0 + ez)
    return float(np.mean(per_sample)), (sig - y) / len(z)


def loss(head: TaskHead, outputs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Task loss and gradient: MSE for regression, BCE-from-logits otherwise."""
    if head.kind == "regression":
        return mse_loss(outputs, targets)
    return bce_logits_loss(outputs, targets)


def l1_penalty(weights, coef: float) -> float:
    """L1 term over weight matrices (biases excluded)."""
    return coef * float(sum(np.abs(w).sum() for w in weights))


def l1_subgradient(w: np.ndarray, coef: float) -> np.ndarray:
    """Subgradient of the L1 term: coef * sign(w), taking sign(0) = 0."""
    return coef * np.sign(w)


@dataclass
class TrainConfig:
    """Optimizer settings shared by the reference net and the additive model."""

    lr: float = 5e-3
    l1: float = 5e-5
    batch_size: int = 256
    epochs: int = 100
    patience: int | None = None  # epochs without val improvement; None = run all


@dataclass
class TrainResult:
    trace: list[dict]  # per-epoch {"train_loss": ..., "val_loss": ...}
    best_epoch: int
    best_val_loss: float


def train_mlp(
    net: Mlp,
    x_train: Matrix,
    y_train: np.ndarray,
    x_val: Matrix,
    y_val: np.ndarray,
    head: TaskHead,
    cfg: TrainConfig,
    rng: Rng,
) -> TrainResult:
    """Minibatch Adagrad with L1 on weights; keeps the validation-best params.

    The net is mutated in place and holds the best-validation parameters on
    return.  Raises :class:`TrainingDivergedError` if the loss goes non-finite.
    """
    if len(x_train) == 0 or len(x_val) == 0:
        raise DomainError("empty training or validation split")
    params = net.parameters()
    state = AdagradState(params, lr=cfg.lr)
    n = len(x_train)
    best_val = math.inf
    best_epoch = -1
    best_params = [p.copy() for p in params]
    since_best = 0
    trace: list[dict] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            preds, cache = _fast_forward_cached(net, xb)
            value, grad = loss(head, preds, yb)
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}: lower the learning rate "
                    "or check the data for unscaled columns"
                )
            g = mlp_backward(net, cache, grad)
            for l in range(net.n_layers):
                g.weights[l] += l1_subgradient(net.weights[l], cfg.l1)
            adagrad_step(params, g.parameters(), state)
            total += value * len(xb)
        val_loss, _ = loss(head, fast_forward(net, x_val), y_val)
        trace.append({"train_loss": total / n, "val_loss": val_loss})
        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            best_params = [p.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if cfg.patience is not None and since_best > cfg.patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    return TrainResult(trace=trace, best_epoch=best_epoch, best_val_loss=best_val)
