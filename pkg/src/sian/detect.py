"""Interaction strength estimation by signed corner sums.

For a feature set J, a target point x*, a baseline x', and a context c, the
strength is the squared scaled alternating sum of f over the 2^|J| corner
points that mix x* and x' coordinates inside J while holding c elsewhere:

    omega_J(c) = ( prod_{i in J} 1/h_i
                   * sum_{C subseteq J} (-1)^{|J|-|C|} f(corner_C) )^2,
    h_i = x*_i - x'_i.

This is the secant analogue of a squared mixed partial derivative; for |J|=2
it is the familiar four-corner difference quotient.  Scores are averaged over
the two contexts {x*, x'} and then over a validation set.

Arithmetic inside a score is strictly ordered (corners in ascending subset-
mask order, h factors in index order, validation samples in index order), so
identities that are exact in real arithmetic stay exact here: a function
with no term spanning all of J scores exactly zero whenever f's values are
exactly representable.  Results never depend on batch shape.

``f`` is any callable taking an (m, d) array of points to a length-m vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateDirectionError,
    DetectionImpossibleError,
    DomainError,
    ShapeMismatchError,
)
from .model import InteractionSet, _coerce_set
from .tensor import Rng

__all__ = [
    "DetectionContext",
    "ScoreRecord",
    "ArchipelagoReport",
    "archi_score",
    "two_point_score",
    "aggregate",
    "aggregate_detailed",
    "score_family",
]


def _as_point(v, d: int | None, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeMismatchError(f"{name} must be a 1-D vector")
    if d is not None and arr.shape != (d,):
        raise ShapeMismatchError(f"{name} has length {arr.shape[0]}, expected {d}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} contains non-finite values")
    return arr


def _corner_values(f, x_star, x_prime, context, idx) -> np.ndarray:
    """Evaluate f on the 2^k corners, ascending subset-mask order."""
    k = len(idx)
    n_corners = 1 << k
    points = np.tile(context, (n_corners, 1))
    masks = np.arange(n_corners)
    for bit, i in enumerate(idx):
        take_star = (masks >> bit) & 1 == 1
        points[:, i] = np.where(take_star, x_star[i], x_prime[i])
    values = np.asarray(f(points), dtype=np.float64)
    if values.shape != (n_corners,):
        raise ShapeMismatchError(
            f"f returned shape {values.shape} for a batch of {n_corners} points"
        )
    return values


def _signs(k: int) -> np.ndarray:
    """(-1)^(k - popcount(mask)) for mask = 0 .. 2^k - 1."""
    masks = np.arange(1 << k)
    pop = np.zeros(1 << k, dtype=np.int64)
    for bit in range(k):
        pop += (masks >> bit) & 1
    return np.where((k - pop) % 2 == 0, 1.0, -1.0)


def archi_score(f, x_star, x_prime, context, j) -> float:
    """omega_J at one context point; nonnegative.

    Raises :class:`DegenerateDirectionError` when x* and x' agree in any
    coordinate of J (the secant direction collapses there).
    """
    j = _coerce_set(j)
    x_star = _as_point(x_star, None, "x_star")
    d = len(x_star)
    x_prime = _as_point(x_prime, d, "x_prime")
    context = _as_point(context, d, "context")
    if j.indices[-1] >= d:
        raise ShapeMismatchError(f"set {j.indices} exceeds dimension {d}")
    idx = list(j.indices)
    h = x_star[idx] - x_prime[idx]
    if np.any(h == 0.0):
        flat = [i for i, hv in zip(idx, h) if hv == 0.0]
        raise DegenerateDirectionError(
            f"x_star and x_prime coincide in coordinate(s) {flat}"
        )
    values = _corner_values(f, x_star, x_prime, context, idx)
    signs = _signs(len(idx))
    acc = 0.0
    for sign, v in zip(signs, values):
        acc += sign * v
    scale = 1.0
    for hv in h:
        scale *= 1.0 / hv
    s = scale * acc
    return s * s


def two_point_score(f, x_star, x_prime, j) -> float:
    """Mean of :func:`archi_score` over the two contexts x* and x'."""
    a = archi_score(f, x_star, x_prime, x_star, j)
    b = archi_score(f, x_star, x_prime, x_prime, j)
    return 0.5 * (a + b)


@dataclass
class DetectionContext:
    """Validation points, a baseline, and sampling policy for aggregation.

    ``baseline`` is either a fixed d-vector or a callable mapping one
    validation point to its baseline (for antipodal-style baselines).
    When the validation set exceeds ``subsample_cap``, a seeded draw without
    replacement picks the rows, kept in ascending index order.
    """

    validation: np.ndarray
    baseline: object
    subsample_cap: int = 1024
    seed: int = 0

    def __post_init__(self):
        self.validation = np.asarray(self.validation, dtype=np.float64)
        if self.validation.ndim != 2 or len(self.validation) == 0:
            raise DomainError("validation set must be a nonempty 2-D array")
        if not np.isfinite(self.validation).all():
            raise DomainError("validation set contains non-finite values")
        if not callable(self.baseline):
            self.baseline = _as_point(self.baseline, self.validation.shape[1], "baseline")
        if self.subsample_cap < 1:
            raise DomainError("subsample cap must be positive")

    @property
    def d(self) -> int:
        return self.validation.shape[1]

    def sampled_rows(self) -> np.ndarray:
        n = len(self.validation)
        if n <= self.subsample_cap:
            return np.arange(n)
        return Rng(self.seed).subsample(n, self.subsample_cap)

    def baseline_for(self, rows: np.ndarray) -> np.ndarray:
        pts = self.validation[rows]
        if callable(self.baseline):
            out = np.stack([
                _as_point(self.baseline(p), self.d, "baseline(x)") for p in pts
            ])
            return out
        return np.tile(self.baseline, (len(rows), 1))


@dataclass
class ScoreRecord:
    """Aggregated strength of one set plus how many samples informed it."""

    interaction: InteractionSet
    score: float
    n_used: int
    n_degenerate: int
    unreliable: bool  # over half the samples were degenerate


def aggregate_detailed(f, ctx: DetectionContext, j) -> ScoreRecord:
    """Mean two-point score over the (possibly subsampled) validation set.

    Samples where any h_i vanishes are skipped and counted; if more than
    half are skipped the record is flagged unreliable, and if every sample
    is degenerate :class:`DetectionImpossibleError` is raised.  The mean
    accumulates in ascending validation-index order.
    """
    j = _coerce_set(j)
    if j.indices[-1] >= ctx.d:
        raise ShapeMismatchError(f"set {j.indices} exceeds dimension {ctx.d}")
    rows = ctx.sampled_rows()
    stars = ctx.validation[rows]
    primes = ctx.baseline_for(rows)
    idx = list(j.indices)
    h = stars[:, idx] - primes[:, idx]
    ok = ~np.any(h == 0.0, axis=1)
    n_total = len(rows)
    n_degenerate = int(n_total - ok.sum())
    if n_degenerate == n_total:
        raise DetectionImpossibleError(
            f"every validation sample is degenerate for set {j.indices}"
        )
    stars, primes, h = stars[ok], primes[ok], h[ok]
    n_used = len(stars)
    k = len(idx)
    n_corners = 1 << k
    signs = _signs(k)

    # one f call per context batch: rows = samples, corners contiguous per row
    def omega(contexts: np.ndarray) -> np.ndarray:
        points = np.repeat(contexts, n_corners, axis=0)
        masks = np.tile(np.arange(n_corners), n_used)
        for bit, i in enumerate(idx):
            take_star = (masks >> bit) & 1 == 1
            star_rep = np.repeat(stars[:, i], n_corners)
            prime_rep = np.repeat(primes[:, i], n_corners)
            points[:, i] = np.where(take_star, star_rep, prime_rep)
        values = np.asarray(f(points), dtype=np.float64)
        if values.shape != (len(points),):
            raise ShapeMismatchError(
                f"f returned shape {values.shape} for a batch of {len(points)} points"
            )
        values = values.reshape(n_used, n_corners)
        acc = np.zeros(n_used)
        for mask in range(n_corners):
            acc += signs[mask] * values[:, mask]
        scale = np.ones(n_used)
        for bit in range(k):
            scale *= 1.0 / h[:, bit]
        s = scale * acc
        return s * s

    per_sample = 0.5 * (omega(stars) + omega(primes))
    total = 0.0
    for v in per_sample:
        total += v
    return ScoreRecord(
        interaction=j,
        score=float(total / n_used),
        n_used=n_used,
        n_degenerate=n_degenerate,
        unreliable=n_degenerate * 2 > n_total,
    )


def aggregate(f, ctx: DetectionContext, j) -> float:
    """Mean interaction strength of set ``j`` over the validation set."""
    return aggregate_detailed(f, ctx, j).score


@dataclass
class ArchipelagoReport:
    """Scores for a collection of sets, in evaluation order."""

    records: list[ScoreRecord] = field(default_factory=list)

    @property
    def scores(self) -> dict[InteractionSet, float]:
        return {r.interaction: r.score for r in self.records}

    def degree_summary(self) -> dict[int, dict]:
        """Per-degree count/mean/min/max of the scores (histogram backbone)."""
        by_degree: dict[int, list[float]] = {}
        for r in self.records:
            by_degree.setdefault(len(r.interaction), []).append(r.score)
        out = {}
        for degree in sorted(by_degree):
            vals = by_degree[degree]
            out[degree] = {
                "count": len(vals),
                "mean": sum(vals) / len(vals),
                "min": min(vals),
                "max": max(vals),
            }
        return out

    def to_csv(self, fh) -> None:
        """Write rows (degree, '+'-joined indices, mean_score, n_samples_used)."""
        fh.write("degree,indices,mean_score,n_samples_used\n")
        for r in self.records:
            fh.write(
                f"{len(r.interaction)},{r.interaction.label},"
                f"{r.score!r},{r.n_used}\n"
            )


def score_family(f, ctx: DetectionContext, sets) -> ArchipelagoReport:
    """Aggregate every set in ``sets`` (order preserved) into one report.

    Sets whose every sample is degenerate are skipped (they cannot be
    scored at all); everything else is recorded.
    """
    report = ArchipelagoReport()
    for j in sets:
        try:
            report.records.append(aggregate_detailed(f, ctx, j))
        except DetectionImpossibleError:
            continue
    return report
