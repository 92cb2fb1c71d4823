"""The additive interaction model: a bias plus one shape subnetwork per
feature set, with three interchangeable execution modes.

``default`` keeps a list of small MLPs, one per interaction set.
``block_sparse`` lays the same parameters out as one block-diagonal matrix
per depth level, so the whole family advances through each layer in a single
sweep.  ``compressed`` stores those block-diagonal levels in CSR form, which
is the compact on-disk layout.  Conversions are lossless, and because every
mode runs on the same strict-order kernels with the same summation order,
forward outputs agree bitwise, not just within a tolerance.

Training (:func:`train_sian`) is where speed matters: it packs same-width
subnets into stacked 3-D tensors and drives them with batched BLAS products.
That path carries ordinary floating-point tolerances, never the exactness
contract.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    ArchitectureError,
    DomainError,
    FamilyLookupError,
    FormatError,
    ShapeMismatchError,
    TrainingDivergedError,
)
from .nn import (
    REGRESSION,
    AdagradState,
    Mlp,
    TaskHead,
    TrainConfig,
    _fast_forward_cached,
    adagrad_step,
    fast_forward,
    init_mlp,
    l1_subgradient,
    loss,
    mlp_backward,
    mlp_forward,
)
from .tensor import (
    BlockDiagMatrix,
    CsrMatrix,
    Matrix,
    Rng,
    as_matrix,
    block_forward,
    from_csr,
    to_csr,
)

__all__ = [
    "MODES",
    "InteractionSet",
    "GamArchitecture",
    "SianModel",
    "ShapeGrid",
    "build_sian",
    "sian_forward",
    "convert_mode",
    "n_params",
    "eval_shape",
    "default_grid_points",
    "SianTrainResult",
    "train_sian",
    "sian_to_json",
    "sian_from_json",
    "save_sian",
    "load_sian",
]

MODES = ("default", "block_sparse", "compressed")


@dataclass(frozen=True)
class InteractionSet:
    """A nonempty set of feature indices, held strictly increasing."""

    indices: tuple[int, ...]

    def __post_init__(self):
        try:
            idx = tuple(int(i) for i in self.indices)
        except (TypeError, ValueError):
            raise ArchitectureError(f"indices must be integers, got {self.indices!r}")
        object.__setattr__(self, "indices", idx)
        if not idx:
            raise ArchitectureError("an interaction set cannot be empty")
        if any(i < 0 for i in idx):
            raise ArchitectureError(f"negative feature index in {idx}")
        if any(a >= b for a, b in zip(idx, idx[1:])):
            raise ArchitectureError(f"indices must be strictly increasing, got {idx}")

    @classmethod
    def of(cls, *indices: int) -> "InteractionSet":
        """Build from indices in any order; duplicates are rejected."""
        return cls(tuple(sorted(int(i) for i in indices)))

    @property
    def order(self) -> int:
        return len(self.indices)

    @property
    def label(self) -> str:
        """'+'-joined index string used in CSV exports and filenames."""
        return "+".join(str(i) for i in self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices


def _coerce_set(item) -> InteractionSet:
    if isinstance(item, InteractionSet):
        return item
    return InteractionSet(tuple(item))


@dataclass(frozen=True)
class GamArchitecture:
    """Feature count, ordered interaction family, subnet widths, and task head.

    The family order is fixed here and every sum over subnets iterates in
    this order, which is what makes cross-mode comparisons exact.
    """

    d: int
    family: tuple[InteractionSet, ...]
    widths: tuple[int, ...] = (16, 12, 8)
    head: TaskHead = REGRESSION

    def __post_init__(self):
        object.__setattr__(self, "d", int(self.d))
        fam = tuple(_coerce_set(s) for s in self.family)
        object.__setattr__(self, "family", fam)
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if self.d < 0:
            raise ArchitectureError(f"feature count must be nonnegative, got {self.d}")
        if any(w < 1 for w in self.widths):
            raise ArchitectureError(f"subnet widths must be positive, got {self.widths}")
        seen = set()
        for s in fam:
            if s.indices in seen:
                raise ArchitectureError(f"duplicate interaction set {s.indices}")
            seen.add(s.indices)
            if s.indices[-1] >= self.d:
                raise ArchitectureError(
                    f"set {s.indices} references feature >= d = {self.d}"
                )

    @property
    def n_subnets(self) -> int:
        return len(self.family)

    @property
    def order(self) -> int:
        """Largest interaction cardinality K (0 for a bias-only family)."""
        return max((len(s) for s in self.family), default=0)

    @property
    def n_levels(self) -> int:
        return len(self.widths) + 1

    @property
    def gather_plan(self) -> tuple[tuple[int, ...], ...]:
        """Per-subnet input column lists, in family order."""
        return tuple(s.indices for s in self.family)

    def subnet_widths(self, s: InteractionSet) -> tuple[int, ...]:
        return (len(s),) + self.widths + (1,)

    def index_of(self, s: InteractionSet) -> int:
        s = _coerce_set(s)
        try:
            return self.family.index(s)
        except ValueError:
            raise FamilyLookupError(f"set {s.indices} is not in the family")


@dataclass
class BlockParams:
    """block_sparse payload: one block-diagonal weight + bias vector per level."""

    levels: list[BlockDiagMatrix]
    biases: list[np.ndarray]


@dataclass
class CsrParams:
    """compressed payload: CSR levels plus zero-copy block views for forward."""

    levels: list[CsrMatrix]
    biases: list[np.ndarray]
    views: list[BlockDiagMatrix]


@dataclass
class SianModel:
    """bias + family of shape subnets, in one of three parameter layouts."""

    arch: GamArchitecture
    bias: float
    mode: str
    subnets: list[Mlp] | None = None
    blocks: BlockParams | None = None
    csr: CsrParams | None = None
    preprocess: dict | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise DomainError(f"unknown mode {self.mode!r}; expected one of {MODES}")


def _level_offsets(arch: GamArchitecture) -> list[tuple[np.ndarray, np.ndarray]]:
    """Block row/col offsets of each depth level's block-diagonal matrix."""
    per_set = [arch.subnet_widths(s) for s in arch.family]
    out = []
    for level in range(arch.n_levels):
        rows = np.zeros(arch.n_subnets + 1, dtype=np.int64)
        cols = np.zeros(arch.n_subnets + 1, dtype=np.int64)
        for t, widths in enumerate(per_set):
            rows[t + 1] = rows[t] + widths[level]
            cols[t + 1] = cols[t] + widths[level + 1]
        out.append((rows, cols))
    return out


def _as_subnets(model: SianModel) -> list[Mlp]:
    """Extract per-subnet MLP copies from whatever layout the model is in."""
    arch = model.arch
    if model.mode == "default":
        return [net.copy() for net in model.subnets]
    levels = model.blocks.levels if model.mode == "block_sparse" else model.csr.views
    biases = model.blocks.biases if model.mode == "block_sparse" else model.csr.biases
    nets = []
    for t in range(arch.n_subnets):
        ws, bs = [], []
        for level, w in enumerate(levels):
            c0, c1 = w.col_offsets[t], w.col_offsets[t + 1]
            ws.append(w.blocks[t].copy())
            bs.append(biases[level][c0:c1].copy())
        nets.append(Mlp(ws, bs))
    return nets


def _assemble(
    arch: GamArchitecture,
    bias: float,
    mode: str,
    nets: list[Mlp],
    preprocess: dict | None,
) -> SianModel:
    """Build a model in ``mode`` from per-subnet nets (which it takes over)."""
    if mode == "default":
        return SianModel(arch, bias, mode, subnets=nets, preprocess=preprocess)
    if arch.n_subnets == 0:
        payload_levels: list = []
        payload_biases: list = []
    else:
        payload_levels = [
            BlockDiagMatrix.from_blocks([net.weights[level] for net in nets])
            for level in range(arch.n_levels)
        ]
        payload_biases = [
            np.concatenate([net.biases[level] for net in nets])
            for level in range(arch.n_levels)
        ]
    if mode == "block_sparse":
        return SianModel(
            arch,
            bias,
            mode,
            blocks=BlockParams(payload_levels, payload_biases),
            preprocess=preprocess,
        )
    csr_levels = [to_csr(w) for w in payload_levels]
    views = [
        from_csr(c, w.row_offsets, w.col_offsets)
        for c, w in zip(csr_levels, payload_levels)
    ]
    return SianModel(
        arch,
        bias,
        mode,
        csr=CsrParams(csr_levels, payload_biases, views),
        preprocess=preprocess,
    )


def build_sian(arch: GamArchitecture, rng: Rng) -> SianModel:
    """Initialize a default-mode model: one Glorot-init subnet per family set,
    bias 0.  An empty family yields a valid bias-only model."""
    nets = [init_mlp(arch.subnet_widths(s), rng) for s in arch.family]
    return SianModel(arch, 0.0, "default", subnets=nets)


def _gather(x: Matrix, plan) -> Matrix:
    if not plan:
        return np.empty((x.shape[0], 0))
    return np.concatenate([x[:, list(idx)] for idx in plan], axis=1)


def sian_forward(model: SianModel, batch: Matrix) -> np.ndarray:
    """bias + sum of subnet contributions, accumulated in family order.

    Classification models return logits.  All three modes execute the same
    strict-order kernels in the same order, so their outputs are bitwise
    equal on equal inputs.
    """
    x = as_matrix(batch, "batch")
    if x.shape[1] != model.arch.d:
        raise ShapeMismatchError(
            f"batch has {x.shape[1]} columns but the model expects {model.arch.d}"
        )
    n = x.shape[0]
    total = np.zeros(n)
    n_sets = model.arch.n_subnets
    if n_sets:
        plan = model.arch.gather_plan
        if model.mode == "default":
            for net, idx in zip(model.subnets, plan):
                np.add(total, mlp_forward(net, x[:, list(idx)]), out=total)
        else:
            if model.mode == "block_sparse":
                levels, biases = model.blocks.levels, model.blocks.biases
            else:
                levels, biases = model.csr.views, model.csr.biases
            a = _gather(x, plan)
            last = len(levels) - 1
            for level, (w, b) in enumerate(zip(levels, biases)):
                z = block_forward(w, a)
                np.add(z, b, out=z)
                a = np.maximum(z, 0.0) if level < last else z
            for t in range(n_sets):
                np.add(total, a[:, t], out=total)
    return total + model.bias


def convert_mode(model: SianModel, target: str) -> SianModel:
    """Re-lay-out parameters into ``target`` mode; values are copied bit-exactly."""
    if target not in MODES:
        raise DomainError(f"unknown mode {target!r}; expected one of {MODES}")
    nets = _as_subnets(model)
    return _assemble(model.arch, model.bias, target, nets, model.preprocess)


def n_params(model: SianModel) -> int:
    """Trainable scalar count, identical across modes (includes the bias)."""
    if model.mode == "default":
        return sum(net.n_params for net in model.subnets) + 1
    if model.mode == "block_sparse":
        weights = sum(w.nnz for w in model.blocks.levels)
        biases = sum(len(b) for b in model.blocks.biases)
    else:
        weights = sum(c.nnz for c in model.csr.levels)
        biases = sum(len(b) for b in model.csr.biases)
    return weights + biases + 1


def _subnet(model: SianModel, t: int) -> Mlp:
    if model.mode == "default":
        return model.subnets[t]
    levels = model.blocks.levels if model.mode == "block_sparse" else model.csr.views
    biases = model.blocks.biases if model.mode == "block_sparse" else model.csr.biases
    ws, bs = [], []
    for level, w in enumerate(levels):
        c0, c1 = w.col_offsets[t], w.col_offsets[t + 1]
        ws.append(w.blocks[t])
        bs.append(biases[level][c0:c1])
    return Mlp(ws, bs)


@dataclass
class ShapeGrid:
    """One subnet evaluated over a tensor grid; bias not included."""

    interaction: InteractionSet
    axes: tuple[np.ndarray, ...]
    values: np.ndarray


def default_grid_points(order: int) -> int:
    """Grid resolution per axis by interaction order: 256 / 64 / 16, then 8."""
    return {1: 256, 2: 64, 3: 16}.get(order, 8)


def eval_shape(model: SianModel, s: InteractionSet, axes) -> ShapeGrid:
    """Evaluate one shape subnet on the cartesian grid spanned by ``axes``.

    ``axes`` is one 1-D coordinate array per member of ``s`` (in index
    order).  Values at a grid point equal that subnet's contribution to
    :func:`sian_forward` at any sample with those coordinates, exactly.
    """
    s = _coerce_set(s)
    t = model.arch.index_of(s)
    axes = tuple(np.asarray(ax, dtype=np.float64) for ax in axes)
    if len(axes) != len(s):
        raise ShapeMismatchError(f"set {s.indices} needs {len(s)} axes, got {len(axes)}")
    for ax in axes:
        if ax.ndim != 1 or len(ax) == 0:
            raise ShapeMismatchError("each grid axis must be a nonempty 1-D array")
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    values = mlp_forward(_subnet(model, t), points)
    return ShapeGrid(s, axes, values.reshape(tuple(len(ax) for ax in axes)))


# ---------------------------------------------------------------------------
# training


@dataclass
class SianTrainResult:
    model: SianModel
    trace: list[dict]
    best_epoch: int
    best_val_loss: float


def _initial_bias(model: SianModel, y_train: np.ndarray) -> float:
    if model.bias != 0.0:
        return float(model.bias)
    if model.arch.head.kind == "regression":
        return float(np.mean(y_train))
    p = float(np.clip(np.mean(y_train), 1e-6, 1.0 - 1e-6))
    return math.log(p / (1.0 - p))


class _StackedGroup:
    """Same-cardinality subnets stacked along a leading axis for batched BLAS."""

    def __init__(self, ts, nets, plan, x_train, x_val):
        self.ts = list(ts)
        n_levels = nets[self.ts[0]].n_layers
        self.w = [
            np.stack([nets[t].weights[level] for t in self.ts])
            for level in range(n_levels)
        ]
        self.b = [
            np.stack([nets[t].biases[level] for t in self.ts])
            for level in range(n_levels)
        ]
        self.x_train = np.stack([x_train[:, list(plan[t])] for t in self.ts])
        self.x_val = np.stack([x_val[:, list(plan[t])] for t in self.ts])

    def forward(self, a):
        """a: (G, b, k) gathered inputs; returns summed contributions and caches."""
        acts, masks = [a], []
        n_levels = len(self.w)
        for level in range(n_levels):
            z = np.matmul(a, self.w[level])
            z += self.b[level][:, None, :]
            if level < n_levels - 1:
                np.maximum(z, 0.0, out=z)
                masks.append(z > 0.0)  # post-ReLU sign equals pre-ReLU sign
                a = z
                acts.append(a)
            else:
                a = z
        return a[:, :, 0].sum(axis=0), acts, masks

    def predict(self, a):
        """Forward without caches, for validation passes."""
        n_levels = len(self.w)
        for level in range(n_levels):
            z = np.matmul(a, self.w[level])
            z += self.b[level][:, None, :]
            if level < n_levels - 1:
                np.maximum(z, 0.0, out=z)
            a = z
        return a[:, :, 0].sum(axis=0)

    def backward(self, acts, masks, upstream, l1):
        """Gradient arrays in the same order as parameters(); L1 on weights."""
        b = upstream.shape[0]
        delta = np.broadcast_to(upstream[None, :, None], (len(self.ts), b, 1))
        d_w = [None] * len(self.w)
        d_b = [None] * len(self.w)
        for level in range(len(self.w) - 1, -1, -1):
            d_w[level] = np.matmul(acts[level].transpose(0, 2, 1), delta)
            if l1:
                d_w[level] += l1_subgradient(self.w[level], l1)
            d_b[level] = delta.sum(axis=1)
            if level > 0:
                delta = np.matmul(delta, self.w[level].transpose(0, 2, 1))
                np.multiply(delta, masks[level - 1], out=delta)
        out = []
        for dw, db in zip(d_w, d_b):
            out.append(dw)
            out.append(db)
        return out

    def parameters(self):
        out = []
        for w, b in zip(self.w, self.b):
            out.append(w)
            out.append(b)
        return out

    def unpack_into(self, nets):
        for j, t in enumerate(self.ts):
            for level in range(len(self.w)):
                nets[t].weights[level] = self.w[level][j].copy()
                nets[t].biases[level] = self.b[level][j].copy()


def _train_block_internal(arch, nets, bias0, x_train, y_train, x_val, y_val, cfg, rng):
    plan = arch.gather_plan
    by_card: dict[int, list[int]] = {}
    for t, s in enumerate(arch.family):
        by_card.setdefault(len(s), []).append(t)
    groups = [
        _StackedGroup(ts, nets, plan, x_train, x_val)
        for _, ts in sorted(by_card.items())
    ]
    bias = np.array([bias0])
    params = [p for grp in groups for p in grp.parameters()] + [bias]
    state = AdagradState(params, lr=cfg.lr)
    head = arch.head
    n = len(x_train)

    def val_loss() -> float:
        preds = np.full(len(x_val), bias[0])
        for grp in groups:
            preds += grp.predict(grp.x_val)
        return loss(head, preds, y_val)[0]

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
            yb = y_train[idx]
            preds = np.full(len(idx), bias[0])
            per_group = []
            for grp in groups:
                contrib, acts, masks = grp.forward(grp.x_train[:, idx, :])
                preds += contrib
                per_group.append((acts, masks))
            value, grad = loss(head, preds, yb)
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}: lower the learning rate "
                    "or check the data for unscaled columns"
                )
            grads = []
            for grp, (acts, masks) in zip(groups, per_group):
                grads.extend(grp.backward(acts, masks, grad, cfg.l1))
            grads.append(np.array([grad.sum()]))
            adagrad_step(params, grads, state)
            total += value * len(idx)
        vl = val_loss()
        trace.append({"train_loss": total / n, "val_loss": vl})
        if vl < best_val:
            best_val = vl
            best_epoch = epoch
            best_params = [p.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if cfg.patience is not None and since_best > cfg.patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    for grp in groups:
        grp.unpack_into(nets)
    return nets, float(bias[0]), trace, best_epoch, best_val


def _train_default_internal(arch, nets, bias0, x_train, y_train, x_val, y_val, cfg, rng):
    plan = arch.gather_plan
    gathered_train = [np.ascontiguousarray(x_train[:, list(idx)]) for idx in plan]
    gathered_val = [np.ascontiguousarray(x_val[:, list(idx)]) for idx in plan]
    bias = np.array([bias0])
    params = [p for net in nets for p in net.parameters()] + [bias]
    state = AdagradState(params, lr=cfg.lr)
    head = arch.head
    n = len(x_train)

    def val_loss() -> float:
        preds = np.full(len(x_val), bias[0])
        for net, xg in zip(nets, gathered_val):
            preds += fast_forward(net, xg)
        return loss(head, preds, y_val)[0]

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
            yb = y_train[idx]
            preds = np.full(len(idx), bias[0])
            caches = []
            for net, xg in zip(nets, gathered_train):
                out, cache = _fast_forward_cached(net, xg[idx])
                preds += out
                caches.append(cache)
            value, grad = loss(head, preds, yb)
            if not math.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}: lower the learning rate "
                    "or check the data for unscaled columns"
                )
            grads = []
            for net, cache in zip(nets, caches):
                g = mlp_backward(net, cache, grad)
                if cfg.l1:
                    for level in range(net.n_layers):
                        g.weights[level] += l1_subgradient(net.weights[level], cfg.l1)
                grads.extend(g.parameters())
            grads.append(np.array([grad.sum()]))
            adagrad_step(params, grads, state)
            total += value * len(idx)
        vl = val_loss()
        trace.append({"train_loss": total / n, "val_loss": vl})
        if vl < best_val:
            best_val = vl
            best_epoch = epoch
            best_params = [p.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if cfg.patience is not None and since_best > cfg.patience:
                break
    for p, bp in zip(params, best_params):
        p[...] = bp
    return nets, float(bias[0]), trace, best_epoch, best_val


def train_sian(
    model: SianModel,
    x_train: Matrix,
    y_train: np.ndarray,
    x_val: Matrix,
    y_val: np.ndarray,
    cfg: TrainConfig,
    rng: Rng,
    internal_mode: str = "block_sparse",
) -> SianTrainResult:
    """Minibatch Adagrad over all subnets plus the bias; L1 on weights only.

    The input model supplies the initial parameters and is left untouched;
    the result holds a new model (in the input's mode) carrying the
    validation-best parameters.  ``internal_mode`` picks the training
    engine: ``block_sparse`` stacks same-width subnets into 3-D tensors and
    steps them with batched products, ``default`` loops subnet by subnet.
    Both produce statistically equivalent fits; block_sparse is the fast one.

    If the model's bias is exactly 0 it is first set to the training-target
    mean (regression) or the base-rate logit (classification).
    """
    x_train = as_matrix(x_train, "x_train")
    x_val = as_matrix(x_val, "x_val")
    y_train = np.asarray(y_train, dtype=np.float64)
    y_val = np.asarray(y_val, dtype=np.float64)
    if len(x_train) == 0 or len(x_val) == 0:
        raise DomainError("empty training or validation split")
    if y_train.shape != (len(x_train),) or y_val.shape != (len(x_val),):
        raise ShapeMismatchError("target lengths do not match feature rows")
    d = model.arch.d
    if x_train.shape[1] != d or x_val.shape[1] != d:
        raise ShapeMismatchError(
            f"data has {x_train.shape[1]} columns but the model expects {d}"
        )
    if internal_mode not in ("block_sparse", "default"):
        raise DomainError(f"unknown training engine {internal_mode!r}")
    nets = _as_subnets(model)
    bias0 = _initial_bias(model, y_train)
    if model.arch.n_subnets == 0:
        trainer = _train_block_internal  # degenerates to bias-only either way
    else:
        trainer = (
            _train_block_internal
            if internal_mode == "block_sparse"
            else _train_default_internal
        )
    nets, bias, trace, best_epoch, best_val = trainer(
        model.arch, nets, bias0, x_train, y_train, x_val, y_val, cfg, rng
    )
    trained = _assemble(model.arch, bias, model.mode, nets, model.preprocess)
    return SianTrainResult(
        model=trained, trace=trace, best_epoch=best_epoch, best_val_loss=best_val
    )


# ---------------------------------------------------------------------------
# serialization

_FORMAT = "sian-model"
_VERSION = 1


def sian_to_json(model: SianModel) -> dict:
    """One JSON-ready document; floats survive a round trip bit-exactly.

    default and block_sparse store each depth level as its dense
    block-diagonal matrix (off-block zeros included); compressed stores CSR
    triplets, which is what makes it the small format.
    """
    arch = model.arch
    doc = {
        "format": _FORMAT,
        "version": _VERSION,
        "d": arch.d,
        "family": [list(s.indices) for s in arch.family],
        "widths": list(arch.widths),
        "head": arch.head.kind,
        "mode": model.mode,
        "bias": float(model.bias),
        "preprocess": model.preprocess,
    }
    if arch.n_subnets == 0:
        doc["levels"] = []
        return doc
    if model.mode == "compressed":
        doc["levels"] = [
            {
                "values": c.values.tolist(),
                "col_indices": c.col_indices.tolist(),
                "row_starts": c.row_starts.tolist(),
                "biases": b.tolist(),
            }
            for c, b in zip(model.csr.levels, model.csr.biases)
        ]
        return doc
    if model.mode == "block_sparse":
        levels, biases = model.blocks.levels, model.blocks.biases
    else:
        packed = _assemble(arch, model.bias, "block_sparse", _as_subnets(model), None)
        levels, biases = packed.blocks.levels, packed.blocks.biases
    doc["levels"] = [
        {"weights": w.dense().tolist(), "biases": b.tolist()}
        for w, b in zip(levels, biases)
    ]
    return doc


def _blocks_from_dense(dense: np.ndarray, rows: np.ndarray, cols: np.ndarray):
    if dense.shape != (rows[-1], cols[-1]):
        raise FormatError(
            f"level matrix is {dense.shape}, expected {(int(rows[-1]), int(cols[-1]))}"
        )
    blocks = []
    leftover = dense.copy()
    for t in range(len(rows) - 1):
        r0, r1 = rows[t], rows[t + 1]
        c0, c1 = cols[t], cols[t + 1]
        blocks.append(np.ascontiguousarray(dense[r0:r1, c0:c1]))
        leftover[r0:r1, c0:c1] = 0.0
    if np.any(leftover):
        raise FormatError("level matrix has nonzero entries outside the diagonal blocks")
    return blocks


def sian_from_json(doc: dict) -> SianModel:
    """Inverse of :func:`sian_to_json`; structural problems raise FormatError."""
    if not isinstance(doc, dict) or doc.get("format") != _FORMAT:
        raise FormatError("not a model document")
    if doc.get("version") != _VERSION:
        raise FormatError(f"unsupported model version {doc.get('version')!r}")
    try:
        arch = GamArchitecture(
            d=doc["d"],
            family=tuple(InteractionSet(tuple(s)) for s in doc["family"]),
            widths=tuple(doc["widths"]),
            head=TaskHead(doc["head"]),
        )
        mode = doc["mode"]
        bias = float(doc["bias"])
        levels_doc = doc["levels"]
        preprocess = doc.get("preprocess")
    except (KeyError, TypeError) as exc:
        raise FormatError(f"model document is missing or mistypes field: {exc}")
    if mode not in MODES:
        raise FormatError(f"unknown mode {mode!r}")
    if arch.n_subnets == 0:
        return _assemble(arch, bias, mode, [], preprocess)
    if len(levels_doc) != arch.n_levels:
        raise FormatError(
            f"expected {arch.n_levels} levels, document has {len(levels_doc)}"
        )
    offsets = _level_offsets(arch)
    if mode == "compressed":
        csr_levels, biases, views = [], [], []
        for (rows, cols), entry in zip(offsets, levels_doc):
            c = CsrMatrix(
                values=np.asarray(entry["values"], dtype=np.float64),
                col_indices=np.asarray(entry["col_indices"], dtype=np.int64),
                row_starts=np.asarray(entry["row_starts"], dtype=np.int64),
                rows=int(rows[-1]),
                cols=int(cols[-1]),
            )
            csr_levels.append(c)
            views.append(from_csr(c, rows, cols))
            biases.append(np.asarray(entry["biases"], dtype=np.float64))
        _check_level_biases(offsets, biases)
        return SianModel(
            arch, bias, mode, csr=CsrParams(csr_levels, biases, views), preprocess=preprocess
        )
    nets_ws: list[list] = [[] for _ in range(arch.n_subnets)]
    nets_bs: list[list] = [[] for _ in range(arch.n_subnets)]
    biases = []
    for (rows, cols), entry in zip(offsets, levels_doc):
        dense = np.asarray(entry["weights"], dtype=np.float64)
        blocks = _blocks_from_dense(dense, rows, cols)
        b = np.asarray(entry["biases"], dtype=np.float64)
        biases.append(b)
        for t, blk in enumerate(blocks):
            nets_ws[t].append(blk)
            nets_bs[t].append(b[cols[t] : cols[t + 1]].copy())
    _check_level_biases(offsets, biases)
    nets = [Mlp(ws, bs) for ws, bs in zip(nets_ws, nets_bs)]
    return _assemble(arch, bias, mode, nets, preprocess)


def _check_level_biases(offsets, biases) -> None:
    for (rows, cols), b in zip(offsets, biases):
        if b.shape != (cols[-1],):
            raise FormatError(
                f"level bias has length {b.shape}, expected {int(cols[-1])}"
            )


def save_sian(model: SianModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(sian_to_json(model), fh)
        fh.write("\n")


def load_sian(path) -> SianModel:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"model file is not valid JSON: {exc}")
    return sian_from_json(doc)
