"""Self-verification suites.

Each suite exercises one family of ground-truth identities at scale and
reports per-check pass/fail with the worst deviation observed, as a
JSON-ready structure.  The test suite runs these same functions with the
documented tolerances, so a report with zero failures is the library
re-deriving its own foundations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .anova import (
    anova_decompose,
    cube_lookup,
    cube_points,
    downward_closure,
    exact_archipelago_expectation,
    fourier_transform,
    histogram_benefit,
    interaction_mass,
    sample_spectrum_masses,
    upper_cone_mass,
    TheoryParams,
)
from .errors import ConfigError
from .fis import FisConfig, select_interactions
from .tensor import Rng

__all__ = [
    "CheckResult",
    "SuiteReport",
    "lemma_suite",
    "recovery_suite",
    "anova_suite",
    "theory_suite",
    "run_suite",
    "SUITES",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_deviation: float
    tolerance: float
    detail: str = ""

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))
        object.__setattr__(self, "max_deviation", float(self.max_deviation))
        object.__setattr__(self, "tolerance", float(self.tolerance))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class SuiteReport:
    suite: str
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def n_failures(self) -> int:
        return sum(not c.passed for c in self.checks)

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "checks": [c.to_json() for c in self.checks],
        }


def lemma_suite(n_functions: int = 200, seed: int = 0) -> SuiteReport:
    """Enumerated corner-difference expectation vs the upper-cone mass.

    Random value tables over {-1,1}^d with d cycling through 3, 4, 5;
    every subset of every function is compared.
    """
    base = Rng(seed)
    worst = 0.0
    n_subsets = 0
    for i in range(n_functions):
        d = 3 + i % 3
        rng = base.spawn()
        values = rng.uniform(-1.0, 1.0, (1 << d,))
        table = fourier_transform(values)
        for mask in range(1 << d):
            subset = [b for b in range(d) if mask >> b & 1]
            gap = abs(
                exact_archipelago_expectation(values, subset)
                - upper_cone_mass(table, subset)
            )
            worst = max(worst, gap)
            n_subsets += 1
    tol = 1e-10
    return SuiteReport(
        suite="lemma",
        checks=(
            CheckResult(
                name="expectation-equals-upper-cone-mass",
                passed=worst < tol,
                max_deviation=worst,
                tolerance=tol,
                detail=f"{n_functions} functions, {n_subsets} subset comparisons",
            ),
        ),
    )


def _random_sparse_table(rng: Rng, d: int, max_sets: int = 5, max_order: int = 4):
    """Value table with 1..max_sets monomials, coefficients at least 0.1."""
    n_sets = 1 + int(rng.next_float() * max_sets)
    support: set[tuple[int, ...]] = set()
    while len(support) < n_sets:
        size = 1 + int(rng.next_float() * max_order)
        support.add(tuple(int(i) for i in rng.subsample(d, size)))
    pts = cube_points(d)
    values = np.zeros(1 << d)
    for subset in sorted(support):
        coeff = (0.1 + 0.9 * rng.next_float()) * (
            1.0 if rng.next_float() < 0.5 else -1.0
        )
        term = np.full(1 << d, coeff)
        for i in subset:
            term = term * pts[:, i]
        values += term
    return values, sorted(support)


def recovery_suite(n_seeds: int = 100, d: int = 8, seed: int = 0) -> SuiteReport:
    """Exact family recovery on random sparse sign functions.

    The search sees the whole cube, uses the flip-every-sign baseline, depth
    d, tau 0.5, and a threshold well under the smallest possible cone mass
    (coefficients are bounded away from zero); success means the returned
    family IS the downward closure of the support, seed after seed.
    """
    base = Rng(seed)
    validation = cube_points(d)
    cfg = FisConfig(K=d, theta=1e-4, tau=0.5)
    failures = []
    for i in range(n_seeds):
        rng = base.spawn()
        values, support = _random_sparse_table(rng, d)
        family = select_interactions(
            cube_lookup(values), validation, lambda p: -p, cfg
        )
        if family.indices != downward_closure(support):
            failures.append(i)
    return SuiteReport(
        suite="recovery",
        checks=(
            CheckResult(
                name="family-equals-downward-closure",
                passed=not failures,
                max_deviation=float(len(failures)),
                tolerance=0.0,
                detail=f"{n_seeds - len(failures)}/{n_seeds} seeds exact",
            ),
        ),
    )


def anova_suite(n_functions: int = 50, seed: int = 0) -> SuiteReport:
    """Reconstruction, orthogonality, and Parseval on random grid functions,
    plus the bivariate worked example's component norms on a fine grid."""
    base = Rng(seed)
    worst_recon = 0.0
    worst_ortho = 0.0
    worst_parseval = 0.0
    for i in range(n_functions):
        rng = base.spawn()
        d = 2 + i % 3
        shape = tuple(3 + int(rng.next_float() * 4) for _ in range(d))
        values = rng.uniform(-2.0, 2.0, shape)
        weights = []
        for s in shape:
            w = rng.uniform(0.1, 1.0, (s,))
            weights.append(w / w.sum())
        axes = [np.arange(s, dtype=float) for s in shape]
        dec = anova_decompose(values, axes, weights)
        worst_recon = max(
            worst_recon, float(np.max(np.abs(dec.reconstruct() - values)))
        )
        subsets = sorted(dec.components, key=lambda s: (len(s), s))
        for j, a in enumerate(subsets):
            for b in subsets[j + 1 :]:
                worst_ortho = max(worst_ortho, abs(dec.inner_product(a, b)))
        measure = dec._measure()
        total = float(np.sum(values**2 * measure))
        worst_parseval = max(
            worst_parseval, abs(sum(dec.norms().values()) - total)
        )

    n = 32
    x = -1.0 + (np.arange(n) + 0.5) / (n / 2)
    w = np.full(n, 1.0 / n)
    grid = 1.0 + x[:, None] + x[:, None] * x[None, :]
    norms = anova_decompose(grid, [x, x], [w, w]).norms()
    targets = {(): 1.0, (0,): 1.0 / 3.0, (1,): 0.0, (0, 1): 1.0 / 9.0}
    worked = max(abs(norms[s] - v) for s, v in targets.items())

    tol = 1e-10
    return SuiteReport(
        suite="anova",
        checks=(
            CheckResult(
                "components-sum-to-function", worst_recon < tol, worst_recon, tol,
                f"{n_functions} random grid functions",
            ),
            CheckResult(
                "components-orthogonal", worst_ortho < tol, worst_ortho, tol,
            ),
            CheckResult(
                "squared-norms-sum-to-total", worst_parseval < tol, worst_parseval, tol,
            ),
            CheckResult(
                "worked-example-norms", worked < 1e-3, worked, 1e-3,
                "1 + x + xy on a 1024-point midpoint grid vs (1, 1/3, 0, 1/9)",
            ),
        ),
    )


def theory_suite(seed: int = 0) -> SuiteReport:
    """Closed-form mass and histogram quantities against independent values."""
    worst_sum = 0.0
    for d in range(1, 31):
        for k in (1, 2, 3):
            total = sum(interaction_mass(d, K, k) for K in range(d + 1))
            worst_sum = max(worst_sum, abs(total - 1.0))

    d, k = 3, 2
    masses = sample_spectrum_masses(d, k, 2000, Rng(seed))
    per_degree = masses.mean(axis=0)
    ratios = per_degree / per_degree.sum()
    worst_mc = max(
        abs(ratios[K] - interaction_mass(d, K, k)) / interaction_mass(d, K, k)
        for K in range(d + 1)
    )

    c_zero, beneficial = histogram_benefit(TheoryParams(r=4, m=4, n=1, snr=1.0, N=10**6))
    c_hand, _ = histogram_benefit(TheoryParams(r=4, m=1, n=1, snr=1.0, N=1))
    hist_dev = max(abs(c_zero), abs(c_hand - 0.8105694691387021))
    hist_ok = c_zero == 0.0 and not beneficial and hist_dev < 1e-12

    a = math.pi**2 / 12.0
    one_dim_dev = abs(interaction_mass(1, 1, 1) - a / (1.0 + a))

    return SuiteReport(
        suite="theory",
        checks=(
            CheckResult(
                "per-degree-masses-sum-to-one", worst_sum < 1e-12, worst_sum, 1e-12,
                "d up to 30, smoothness 1..3",
            ),
            CheckResult(
                "monte-carlo-spectrum-ratios", worst_mc < 0.05, worst_mc, 0.05,
                "2000 draws, d=3, k=2, relative",
            ),
            CheckResult(
                "histogram-attenuation-hand-cases", hist_ok, hist_dev, 1e-12,
                "c(m=r)=0 and never beneficial; c(1,4,1) closed form",
            ),
            CheckResult(
                "one-dimensional-mass-closed-form",
                one_dim_dev < 1e-12, one_dim_dev, 1e-12,
                "series zeta(2) against pi^2/6",
            ),
        ),
    )


SUITES = {
    "lemma": lemma_suite,
    "recovery": recovery_suite,
    "anova": anova_suite,
    "theory": theory_suite,
}


def run_suite(name: str, seed: int = 0) -> SuiteReport:
    """Run one named suite (or 'all') and return its report."""
    if name == "all":
        checks = []
        for suite_name in SUITES:
            checks.extend(SUITES[suite_name](seed=seed).checks)
        return SuiteReport(suite="all", checks=tuple(checks))
    if name not in SUITES:
        raise ConfigError(
            f"unknown suite {name!r}; choose from {', '.join([*SUITES, 'all'])}"
        )
    return SUITES[name](seed=seed)
