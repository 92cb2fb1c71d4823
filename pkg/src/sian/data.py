"""Dataset ingestion, standardization, split/fold plans, and metrics.

CSV files come in with a header row; declared categorical columns are one-hot
expanded and appended after the numeric columns, rows with missing cells are
dropped, and everything downstream works on dense float arrays.  Features and
regression targets are standardized with training-fold statistics only.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    ShapeMismatchError,
    UndefinedMetricError,
)
from .tensor import Rng

__all__ = [
    "Dataset",
    "CsvSchema",
    "SplitPlan",
    "SplitAssignment",
    "Standardizer",
    "DroppedFeatureWarning",
    "load_csv",
    "standardize",
    "metrics",
    "auroc",
    "auprc",
    "fold_summary",
]

REGRESSION_TASK = "regression"
CLASSIFICATION_TASK = "classification"
_TASKS = (REGRESSION_TASK, CLASSIFICATION_TASK)


class DroppedFeatureWarning(UserWarning):
    """A zero-variance feature was removed during standardization."""


@dataclass(frozen=True)
class Dataset:
    """Dense feature matrix, target vector, and the task they belong to."""

    feature_names: tuple[str, ...]
    x: np.ndarray
    y: np.ndarray
    task: str

    def __post_init__(self):
        if self.task not in _TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        if self.x.ndim != 2 or self.y.ndim != 1 or len(self.x) != len(self.y):
            raise ShapeMismatchError(
                f"features {self.x.shape} do not line up with targets {self.y.shape}"
            )
        if len(self.feature_names) != self.x.shape[1]:
            raise ShapeMismatchError(
                f"{len(self.feature_names)} names for {self.x.shape[1]} columns"
            )
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise DataError("non-finite values survived ingestion")
        if self.task == CLASSIFICATION_TASK and not np.all(
            (self.y == 0.0) | (self.y == 1.0)
        ):
            raise DataError("classification targets must be 0 or 1")

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class CsvSchema:
    """Which column is the label, what the task is, what gets one-hot coded."""

    label: str
    task: str = REGRESSION_TASK
    categorical: tuple[str, ...] = ()

    def __post_init__(self):
        if self.task not in _TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        object.__setattr__(self, "categorical", tuple(self.categorical))


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a UTF-8 header CSV into a Dataset.

    Numeric columns keep header order; each declared categorical column is
    replaced by one indicator column per observed level (levels sorted, blocks
    appended after the numeric columns).  Rows containing empty cells are
    dropped; a non-empty cell that fails to parse as a number names its line.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if schema.label not in header:
            raise ConfigError(f"{path}: no column named {schema.label!r}")
        for col in schema.categorical:
            if col not in header:
                raise ConfigError(f"{path}: declared categorical column {col!r} missing")
        label_pos = header.index(schema.label)
        cat_pos = {header.index(c): c for c in schema.categorical}
        numeric_pos = [
            i for i in range(len(header)) if i != label_pos and i not in cat_pos
        ]

        numeric_rows: list[list[float]] = []
        cat_rows: list[list[str]] = []
        labels: list[float] = []
        n_dropped = 0
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {reader.line_num}: {len(row)} cells, "
                    f"expected {len(header)}"
                )
            cells = [c.strip() for c in row]
            if any(not cells[i] for i in (*numeric_pos, label_pos, *cat_pos)):
                n_dropped += 1
                continue
            try:
                nums = [float(cells[i]) for i in numeric_pos]
                lab = float(cells[label_pos])
            except ValueError as exc:
                raise DataError(f"{path}: line {reader.line_num}: {exc}") from None
            numeric_rows.append(nums)
            cat_rows.append([cells[i] for i in sorted(cat_pos)])
            labels.append(lab)

    if not labels:
        raise DataError(f"{path}: no usable rows (dropped {n_dropped})")

    names = [header[i] for i in numeric_pos]
    x = np.array(numeric_rows, dtype=np.float64).reshape(len(labels), len(numeric_pos))
    for slot, pos in enumerate(sorted(cat_pos)):
        col = header[pos]
        raw = [r[slot] for r in cat_rows]
        levels = sorted(set(raw))
        block = np.zeros((len(raw), len(levels)))
        level_of = {lv: j for j, lv in enumerate(levels)}
        for i, v in enumerate(raw):
            block[i, level_of[v]] = 1.0
        x = np.concatenate([x, block], axis=1)
        names.extend(f"{col}={lv}" for lv in levels)

    return Dataset(
        feature_names=tuple(names),
        x=x,
        y=np.array(labels, dtype=np.float64),
        task=schema.task,
    )


@dataclass(frozen=True)
class SplitPlan:
    """Seeded 80/20 test carve-out plus k validation folds of the rest."""

    test_fraction: float = 0.2
    n_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.test_fraction < 1.0:
            raise ConfigError(f"test fraction {self.test_fraction} outside [0, 1)")
        if self.n_folds < 1:
            raise ConfigError("need at least one fold")

    def assign(self, n: int) -> "SplitAssignment":
        """Shuffle range(n) once, slice off the test block, cut folds."""
        if n < 1:
            raise DataError("cannot split an empty dataset")
        perm = Rng(self.seed).permutation(n)
        n_test = int(n * self.test_fraction)
        pool = perm[n_test:]
        if len(pool) < self.n_folds:
            raise ConfigError(
                f"{len(pool)} non-test rows cannot form {self.n_folds} folds"
            )
        folds = tuple(np.array(f) for f in np.array_split(pool, self.n_folds))
        return SplitAssignment(test=perm[:n_test], folds=folds)


@dataclass(frozen=True)
class SplitAssignment:
    """Concrete row indices: disjoint folds partitioning the non-test rows."""

    test: np.ndarray
    folds: tuple[np.ndarray, ...]

    def fold(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(train, validation) indices for fold i."""
        val = self.folds[i]
        train = np.concatenate([f for j, f in enumerate(self.folds) if j != i])
        return train, val


@dataclass(frozen=True)
class Standardizer:
    """Affine feature/target transform fitted on a training fold.

    Only features with positive training variance are kept; their positions
    in the ORIGINAL column order are in ``kept``.  Target statistics are None
    for classification.
    """

    feature_mean: np.ndarray
    feature_std: np.ndarray
    kept: tuple[int, ...]
    feature_names: tuple[str, ...]
    target_mean: float | None
    target_std: float | None

    def transform_x(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        k = list(self.kept)
        return (x[:, k] - self.feature_mean[k]) / self.feature_std[k]

    def transform_y(self, y: np.ndarray) -> np.ndarray:
        if self.target_mean is None:
            return np.asarray(y, dtype=np.float64)
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_y(self, y: np.ndarray) -> np.ndarray:
        if self.target_mean is None:
            return np.asarray(y, dtype=np.float64)
        return np.asarray(y, dtype=np.float64) * self.target_std + self.target_mean

    def to_json(self) -> dict:
        return {
            "feature_mean": [float(v) for v in self.feature_mean],
            "feature_std": [float(v) for v in self.feature_std],
            "kept": list(self.kept),
            "feature_names": list(self.feature_names),
            "target_mean": self.target_mean,
            "target_std": self.target_std,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Standardizer":
        return cls(
            feature_mean=np.array(doc["feature_mean"], dtype=np.float64),
            feature_std=np.array(doc["feature_std"], dtype=np.float64),
            kept=tuple(int(i) for i in doc["kept"]),
            feature_names=tuple(doc["feature_names"]),
            target_mean=doc["target_mean"],
            target_std=doc["target_std"],
        )


def standardize(ds: Dataset, train_idx) -> tuple[Dataset, Standardizer]:
    """Standardize every row of a dataset with training-fold statistics.

    Returns the transformed dataset (zero-variance features dropped, with a
    warning naming them) and the fitted transform, which downstream code
    applies to grids and fresh data.  Regression targets are standardized
    too; classification labels pass through.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if len(train_idx) == 0:
        raise DataError("empty training fold")
    xt = ds.x[train_idx]
    mean = xt.mean(axis=0)
    std = xt.std(axis=0)
    kept = tuple(int(i) for i in np.flatnonzero(std > 0.0))
    dropped = [ds.feature_names[i] for i in range(ds.d) if i not in kept]
    if dropped:
        warnings.warn(
            f"dropping constant features: {', '.join(dropped)}",
            DroppedFeatureWarning,
            stacklevel=2,
        )
    if ds.task == REGRESSION_TASK:
        t_mean = float(ds.y[train_idx].mean())
        t_std = float(ds.y[train_idx].std())
        if t_std == 0.0:
            raise DataError("training targets are constant")
    else:
        t_mean = t_std = None
    stdzr = Standardizer(
        feature_mean=mean,
        feature_std=std,
        kept=kept,
        feature_names=tuple(ds.feature_names[i] for i in kept),
        target_mean=t_mean,
        target_std=t_std,
    )
    out = Dataset(
        feature_names=stdzr.feature_names,
        x=stdzr.transform_x(ds.x),
        y=stdzr.transform_y(ds.y),
        task=ds.task,
    )
    return out, stdzr


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    return (starts + (counts + 1) / 2.0)[inverse]


def auroc(scores, labels) -> float:
    """Probability a positive outranks a negative, ties counting one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    pos = labels == 1.0
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("need both classes to rank against each other")
    ranks = _average_ranks(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auprc(scores, labels) -> float:
    """Area under the precision-recall curve by step integration.

    Thresholds sweep the distinct scores from high to low; each step adds
    (recall gain) * (precision at that threshold), with tied scores entering
    together.  No interpolation.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    n_pos = int((labels == 1.0).sum())
    if n_pos == 0 or n_pos == len(labels):
        raise UndefinedMetricError("need both classes for a precision-recall curve")
    order = np.argsort(-scores, kind="mergesort")
    s = scores[order]
    l = labels[order]
    area = 0.0
    tp = fp = 0
    prev_recall = 0.0
    i = 0
    n = len(s)
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        tp += int((l[i:j] == 1.0).sum())
        fp += (j - i) - int((l[i:j] == 1.0).sum())
        recall = tp / n_pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
        i = j
    return float(area)


def metrics(preds, targets, task: str) -> dict:
    """Task-appropriate quality numbers: {mse} or {auroc, auprc}."""
    preds = np.asarray(preds, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if preds.shape != targets.shape or preds.ndim != 1 or len(preds) == 0:
        raise ShapeMismatchError(
            f"predictions {preds.shape} vs targets {targets.shape}"
        )
    if task == REGRESSION_TASK:
        return {"mse": float(np.mean((preds - targets) ** 2))}
    if task == CLASSIFICATION_TASK:
        return {"auroc": auroc(preds, targets), "auprc": auprc(preds, targets)}
    raise ConfigError(f"unknown task {task!r}")


def fold_summary(per_fold: list[dict]) -> dict:
    """{metric: {mean, std, folds}} across a list of per-fold metric dicts."""
    if not per_fold:
        return {}
    out = {}
    for name in per_fold[0]:
        vals = [float(m[name]) for m in per_fold]
        out[name] = {
            "mean": float(np.mean(vals)),
            "std": float(np.std(vals)),
            "folds": vals,
        }
    return out
