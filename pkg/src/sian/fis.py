"""Breadth-first interaction selection over the feature-subset lattice.

Level 1 scores every singleton.  A set of size k+1 becomes a candidate only
when the fraction of its k-subsets already admitted exceeds the heredity
threshold tau, and a scored candidate joins the family only when its mean
strength exceeds the per-degree threshold theta.  Search stops after level K.
The selected family plugs directly into a model architecture.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .detect import (
    ArchipelagoReport,
    DetectionContext,
    ScoreRecord,
    aggregate_detailed,
)
from .errors import (
    ArchitectureError,
    ConfigError,
    DetectionImpossibleError,
    DomainError,
    FormatError,
    ShapeMismatchError,
)
from .model import REGRESSION, GamArchitecture, InteractionSet, TaskHead, _coerce_set

__all__ = [
    "FisConfig",
    "InteractionFamily",
    "SkippedCandidateWarning",
    "heredity_score",
    "select_interactions",
    "family_to_architecture",
    "family_to_json",
    "family_from_json",
    "save_family",
    "load_family",
]


class SkippedCandidateWarning(UserWarning):
    """A candidate could not be scored on any validation sample."""


@dataclass(frozen=True)
class FisConfig:
    """Search depth and thresholds.

    ``theta`` is either one scalar applied at every degree or a sequence
    giving the threshold for degrees 1..K.  ``tau`` is the heredity cutoff;
    both comparisons are strict.
    """

    K: int
    theta: float | tuple[float, ...]
    tau: float = 0.5
    subsample_cap: int = 1024
    seed: int = 0

    def __post_init__(self):
        if self.K < 1:
            raise ConfigError(f"max order must be at least 1, got {self.K}")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError(f"heredity threshold must lie in [0, 1], got {self.tau}")
        if self.subsample_cap < 1:
            raise ConfigError("subsample cap must be positive")
        theta = self.theta
        if np.ndim(theta) == 0:
            theta = float(theta)
            if theta < 0.0:
                raise ConfigError(f"strength threshold must be >= 0, got {theta}")
        else:
            theta = tuple(float(t) for t in theta)
            if len(theta) < self.K:
                raise ConfigError(
                    f"per-degree thresholds cover {len(theta)} degrees, need {self.K}"
                )
            if any(t < 0.0 for t in theta):
                raise ConfigError("strength thresholds must be >= 0")
        object.__setattr__(self, "theta", theta)

    def theta_for(self, degree: int) -> float:
        if isinstance(self.theta, tuple):
            return self.theta[degree - 1]
        return self.theta


@dataclass(frozen=True)
class InteractionFamily:
    """Selected sets in discovery order with their recorded strengths.

    ``evaluated`` keeps the score record of every candidate that was scored,
    admitted or not, for histograms and audits.
    """

    sets: tuple[InteractionSet, ...]
    strengths: tuple[float, ...]
    evaluated: tuple[ScoreRecord, ...] = ()

    def __post_init__(self):
        sets = tuple(_coerce_set(s) for s in self.sets)
        object.__setattr__(self, "sets", sets)
        object.__setattr__(self, "strengths", tuple(float(v) for v in self.strengths))
        if len(self.strengths) != len(sets):
            raise ShapeMismatchError(
                f"{len(sets)} sets but {len(self.strengths)} strengths"
            )
        seen = set()
        for s in sets:
            if s.indices in seen:
                raise ArchitectureError(f"duplicate interaction set {s.indices}")
            seen.add(s.indices)

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    @property
    def indices(self) -> tuple[tuple[int, ...], ...]:
        return tuple(s.indices for s in self.sets)

    def report(self) -> ArchipelagoReport:
        """All evaluated candidates as an exportable score table."""
        return ArchipelagoReport(records=self.evaluated)


def heredity_score(j, family) -> float:
    """Fraction of the immediate subsets of j already present in the family.

    ``family`` may be an InteractionFamily or any iterable of index sets.
    """
    j = _coerce_set(j).indices
    if len(j) < 2:
        raise DomainError("heredity is defined for sets of at least two features")
    present = {_coerce_set(s).indices for s in family}
    hits = 0
    for drop in range(len(j)):
        sub = j[:drop] + j[drop + 1 :]
        if sub in present:
            hits += 1
    return hits / len(j)


def select_interactions(f, validation, baseline, cfg: FisConfig) -> InteractionFamily:
    """Breadth-first threshold search, one lattice level at a time.

    ``f`` maps an (m, d) batch to m values; ``baseline`` is a d-vector or a
    per-point callable.  Candidates within a level are scored in lexicographic
    order and the returned family lists admissions degree-ascending, so the
    whole procedure is deterministic for a fixed seed.
    """
    validation = np.asarray(validation, dtype=np.float64)
    if validation.ndim != 2:
        raise ShapeMismatchError("validation set must be a 2-d array")
    d = validation.shape[1]
    if d == 0:
        return InteractionFamily(sets=(), strengths=(), evaluated=())
    ctx = DetectionContext(
        validation=validation,
        baseline=baseline,
        subsample_cap=cfg.subsample_cap,
        seed=cfg.seed,
    )

    admitted: list[tuple[int, ...]] = []
    strengths: list[float] = []
    records: list[ScoreRecord] = []
    candidates: list[tuple[int, ...]] = [(i,) for i in range(d)]
    level = 1
    while level <= cfg.K and candidates:
        theta = cfg.theta_for(level)
        level_admitted: list[tuple[int, ...]] = []
        for j in candidates:
            try:
                rec = aggregate_detailed(f, ctx, j)
            except DetectionImpossibleError:
                warnings.warn(
                    f"every sample is degenerate for {'+'.join(map(str, j))}; "
                    "candidate skipped",
                    SkippedCandidateWarning,
                    stacklevel=2,
                )
                continue
            records.append(rec)
            if rec.score > theta:
                level_admitted.append(j)
                strengths.append(rec.score)
        admitted.extend(level_admitted)
        pool = {
            tuple(sorted(set(i_set) | {feat}))
            for i_set in level_admitted
            for feat in range(d)
            if feat not in i_set
        }
        present = set(admitted)
        candidates = sorted(c for c in pool if heredity_score(c, present) > cfg.tau)
        level += 1

    return InteractionFamily(
        sets=tuple(InteractionSet.of(*j) for j in admitted),
        strengths=tuple(strengths),
        evaluated=tuple(records),
    )


def family_to_architecture(
    family,
    d: int,
    widths: tuple[int, ...] = (16, 12, 8),
    head: TaskHead = REGRESSION,
) -> GamArchitecture:
    """Architecture whose subnets are the family's sets in discovery order."""
    sets = tuple(family.sets) if isinstance(family, InteractionFamily) else tuple(family)
    return GamArchitecture(d=d, family=sets, widths=widths, head=head)


def family_to_json(family: InteractionFamily) -> list:
    """Plain-list form: one object per set with its recorded strength."""
    return [
        {"indices": list(s.indices), "strength": v}
        for s, v in zip(family.sets, family.strengths)
    ]


def family_from_json(data) -> InteractionFamily:
    if not isinstance(data, list):
        raise FormatError("family file must hold a JSON list")
    sets = []
    strengths = []
    for entry in data:
        if not isinstance(entry, dict) or "indices" not in entry:
            raise FormatError(f"malformed family entry: {entry!r}")
        sets.append(tuple(int(i) for i in entry["indices"]))
        strengths.append(float(entry.get("strength", 0.0)))
    return InteractionFamily(sets=tuple(sets), strengths=tuple(strengths))


def save_family(family: InteractionFamily, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(family_to_json(family), fh, indent=1)
        fh.write("\n")


def load_family(path) -> InteractionFamily:
    with open(path, encoding="utf-8") as fh:
        return family_from_json(json.load(fh))
