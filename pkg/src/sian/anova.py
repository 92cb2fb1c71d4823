"""Exact small-dimension ground truth.

Pseudo-boolean Fourier transforms on {-1,1}^d, the corner-difference /
upper-cone identity verified by full enumeration, functional ANOVA on finite
product grids, and closed-form interaction-mass and histogram-benefit
quantities for random smooth signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    MeasureError,
    ResourceLimitError,
    ShapeMismatchError,
)
from .tensor import Rng

__all__ = [
    "FourierTable",
    "AnovaDecomposition",
    "TheoryParams",
    "mask_of",
    "indices_of",
    "cube_points",
    "cube_lookup",
    "fourier_transform",
    "inverse_fourier",
    "upper_cone_mass",
    "exact_archipelago_expectation",
    "downward_closure",
    "anova_decompose",
    "zeta_even",
    "interaction_mass",
    "histogram_benefit",
    "sample_spectrum_masses",
]

_MAX_TRANSFORM_D = 20
_MAX_ENUMERATION_D = 10
_MAX_GRID_D = 6
_MAX_GRID_RES = 64


def mask_of(indices, d: int) -> int:
    """Bitmask for a set of feature indices (bit i set iff i is in the set)."""
    m = 0
    for i in indices:
        i = int(i)
        if not 0 <= i < d:
            raise DomainError(f"feature index {i} outside range(0, {d})")
        m |= 1 << i
    return m


def indices_of(mask: int) -> tuple[int, ...]:
    """Ascending feature indices encoded by a bitmask."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def cube_points(d: int) -> np.ndarray:
    """All 2^d sign vectors, row p having x_i = -1 iff bit i of p is set.

    Row order matches the value-table convention used throughout this module.
    """
    if d > _MAX_TRANSFORM_D:
        raise ResourceLimitError(f"refusing to enumerate 2^{d} cube points")
    p = np.arange(1 << d)
    bits = (p[:, None] >> np.arange(d)[None, :]) & 1
    return 1.0 - 2.0 * bits


def cube_lookup(values: np.ndarray):
    """Wrap a value table over {-1,1}^d as a batch callable on sign vectors.

    Rows of the input batch must have entries in {-1, +1}; the result is an
    exact table lookup, so repeated corner evaluations are bit-stable.
    """
    values = np.asarray(values, dtype=np.float64)
    d = _table_dim(values)

    def f(batch: np.ndarray) -> np.ndarray:
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2 or batch.shape[1] != d:
            raise ShapeMismatchError(f"expected batch of shape (n, {d})")
        if not np.all(np.abs(batch) == 1.0):
            raise DomainError("cube lookup requires entries in {-1, +1}")
        masks = ((batch < 0).astype(np.int64) << np.arange(d)[None, :]).sum(axis=1)
        return values[masks]

    return f


def _table_dim(values: np.ndarray) -> int:
    n = values.size
    d = n.bit_length() - 1
    if n <= 0 or (1 << d) != n:
        raise ShapeMismatchError(f"value table size {n} is not a power of two")
    return d


@dataclass(frozen=True)
class FourierTable:
    """Complete multilinear coefficients of a function on {-1,1}^d.

    ``coefficients[mask]`` is c_I for the subset I encoded by ``mask``; zeros
    are stored like any other value, so the table always has 2^d entries.
    """

    d: int
    coefficients: np.ndarray

    def __post_init__(self):
        if self.coefficients.size != (1 << self.d):
            raise ShapeMismatchError(
                f"need 2^{self.d} coefficients, got {self.coefficients.size}"
            )

    def coefficient(self, indices) -> float:
        return float(self.coefficients[mask_of(indices, self.d)])

    def support(self, tol: float = 0.0) -> tuple[tuple[int, ...], ...]:
        """Subsets whose coefficient magnitude exceeds tol, smallest first."""
        masks = [m for m in range(1 << self.d) if abs(self.coefficients[m]) > tol]
        sets = [indices_of(m) for m in masks]
        return tuple(sorted(sets, key=lambda s: (len(s), s)))


def _walsh_hadamard(a: np.ndarray) -> np.ndarray:
    """Unnormalized transform: out[q] = sum_p (-1)^popcount(p & q) a[p]."""
    n = a.size
    h = 1
    while h < n:
        a = a.reshape(-1, 2, h)
        top = a[:, 0, :] + a[:, 1, :]
        bot = a[:, 0, :] - a[:, 1, :]
        a = np.stack([top, bot], axis=1).reshape(n)
        h *= 2
    return a


def fourier_transform(values: np.ndarray) -> FourierTable:
    """Multilinear coefficients of a value table over {-1,1}^d.

    c_I is the cube average of f(x) * prod_{i in I} x_i; the table index p
    encodes the point with x_i = -1 iff bit i of p is set.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    d = _table_dim(values)
    if d > _MAX_TRANSFORM_D:
        raise ResourceLimitError(f"d = {d} exceeds the exhaustive-transform cap")
    coeff = _walsh_hadamard(values.copy()) / values.size
    return FourierTable(d, coeff)


def inverse_fourier(table: FourierTable) -> np.ndarray:
    """Value table over {-1,1}^d reconstructed from coefficients."""
    return _walsh_hadamard(table.coefficients.astype(np.float64).copy())


def upper_cone_mass(table: FourierTable, subset) -> float:
    """Sum of squared coefficients over all supersets of the given subset."""
    a = mask_of(subset, table.d)
    masks = np.arange(1 << table.d)
    above = (masks & a) == a
    return float(np.sum(table.coefficients[above] ** 2))


def _submasks(mask: int) -> list[int]:
    subs = []
    s = mask
    while True:
        subs.append(s)
        if s == 0:
            break
        s = (s - 1) & mask
    return subs[::-1]


def exact_archipelago_expectation(values: np.ndarray, subset) -> float:
    """Expected squared corner difference over all 4^d point pairs.

    For x, y independent uniform on the cube this is
    E[(sum_{C subseteq A} (-1)^{|A|-|C|} f(x_C + y_{C'}))^2] / 2^{|A|},
    where the mixed point takes coordinates in C from x and the rest from y.
    Exhaustive, hence exact up to float rounding.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    d = _table_dim(values)
    if d > _MAX_ENUMERATION_D:
        raise ResourceLimitError(f"4^{d} point pairs exceed the enumeration cap")
    a = mask_of(subset, d)
    k = bin(a).count("1")
    n = values.size
    full = n - 1
    x = np.arange(n)[:, None]
    y = np.arange(n)[None, :]
    acc = np.zeros((n, n))
    for c in _submasks(a):
        sign = -1.0 if (k - bin(c).count("1")) % 2 else 1.0
        mixed = (x & c) | (y & (full ^ c))
        acc += sign * values[mixed]
    return float(np.mean(acc**2)) / (1 << k)


def downward_closure(family) -> tuple[tuple[int, ...], ...]:
    """All nonempty subsets of the members of a set family.

    Returned smallest-degree first, lexicographic within a degree.
    """
    seen: set[tuple[int, ...]] = set()
    for member in family:
        idx = tuple(sorted(set(int(i) for i in member)))
        m = len(idx)
        for pick in range(1, 1 << m):
            sub = tuple(idx[b] for b in range(m) if pick >> b & 1)
            seen.add(sub)
    return tuple(sorted(seen, key=lambda s: (len(s), s)))


@dataclass(frozen=True)
class AnovaDecomposition:
    """Orthogonal components of a function on a finite product grid.

    ``components`` maps each subset (ascending index tuple, including the
    empty tuple) to a table over the grid axes of that subset alone.
    """

    axes: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]
    components: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.axes)

    def _expanded(self, subset) -> np.ndarray:
        shape = [1] * self.d
        for i in subset:
            shape[i] = len(self.axes[i])
        return self.components[tuple(subset)].reshape(shape)

    def reconstruct(self) -> np.ndarray:
        """Pointwise sum of every component over the full grid."""
        full = tuple(len(ax) for ax in self.axes)
        out = np.zeros(full)
        for subset in sorted(self.components, key=lambda s: (len(s), s)):
            out = out + self._expanded(subset)
        return out

    def _measure(self) -> np.ndarray:
        w = np.ones(tuple(len(ax) for ax in self.axes))
        for i, wi in enumerate(self.weights):
            shape = [1] * self.d
            shape[i] = len(wi)
            w = w * wi.reshape(shape)
        return w

    def inner_product(self, a, b) -> float:
        """Integral of f_a * f_b against the product measure."""
        w = self._measure()
        return float(np.sum(self._expanded(a) * self._expanded(b) * w))

    def norms(self) -> dict:
        """Squared measure-weighted norm of every component."""
        return {s: self.inner_product(s, s) for s in self.components}


def anova_decompose(values: np.ndarray, axes, weights) -> AnovaDecomposition:
    """Split a grid function into orthogonal per-subset components.

    ``values`` has one axis per feature; ``weights[i]`` is a probability
    vector over ``axes[i]`` and the measure is their product.  Components
    come from inclusion-exclusion over conditional expectations, so they sum
    back to the input and are mutually orthogonal under the measure.
    """
    values = np.asarray(values, dtype=np.float64)
    d = values.ndim
    if d > _MAX_GRID_D:
        raise ResourceLimitError(f"grid dimension {d} exceeds the exhaustive cap")
    if len(axes) != d or len(weights) != d:
        raise ShapeMismatchError("need one axis and one weight vector per dimension")
    axes = tuple(np.asarray(ax, dtype=np.float64).ravel() for ax in axes)
    weights = tuple(np.asarray(w, dtype=np.float64).ravel() for w in weights)
    for i in range(d):
        r = values.shape[i]
        if r > _MAX_GRID_RES:
            raise ResourceLimitError(f"axis {i} resolution {r} exceeds the cap")
        if len(axes[i]) != r or len(weights[i]) != r:
            raise ShapeMismatchError(f"axis {i}: table has {r} points")
        if np.any(weights[i] < 0.0):
            raise MeasureError(f"axis {i}: negative probability weight")
        if abs(float(np.sum(weights[i])) - 1.0) > 1e-12:
            raise MeasureError(f"axis {i}: weights sum to {np.sum(weights[i])!r}")

    # conditional expectation over the complement of each subset, keepdims so
    # tables of different subsets broadcast against each other
    tilde: dict[int, np.ndarray] = {}
    for mask in range(1 << d):
        t = values
        for i in range(d):
            if not mask >> i & 1:
                shape = [1] * d
                shape[i] = values.shape[i]
                t = (t * weights[i].reshape(shape)).sum(axis=i, keepdims=True)
        tilde[mask] = t

    components: dict[tuple[int, ...], np.ndarray] = {}
    for mask in range(1 << d):
        k = bin(mask).count("1")
        comp = np.zeros(tilde[mask].shape)
        for sub in _submasks(mask):
            sign = -1.0 if (k - bin(sub).count("1")) % 2 else 1.0
            comp = comp + sign * tilde[sub]
        subset = indices_of(mask)
        components[subset] = comp.reshape(tuple(values.shape[i] for i in subset))

    return AnovaDecomposition(axes=axes, weights=weights, components=components)


def zeta_even(k: float) -> float:
    """zeta(2k) by direct series summation plus a midpoint tail integral."""
    if k < 1:
        raise DomainError("smoothness order must be at least 1")
    s = 2.0 * float(k)
    n = 100_000
    terms = np.arange(1, n + 1, dtype=np.float64) ** (-s)
    head = float(terms[::-1].sum())
    tail = (n + 0.5) ** (1.0 - s) / (s - 1.0)
    return head + tail


def interaction_mass(d: int, K: int, k: float) -> float:
    """Expected fraction of signal mass on interactions of exactly K features.

    For the random k-smooth signal the per-degree masses follow
    C(d, K) a^K / (1 + a)^d with a = zeta(2k) / 2, which sums to one over K.
    """
    if d < 1:
        raise DomainError("dimension must be positive")
    if not 0 <= K <= d:
        raise DomainError(f"degree {K} outside [0, {d}]")
    a = zeta_even(k) / 2.0
    return math.comb(d, K) * a**K / (1.0 + a) ** d


@dataclass(frozen=True)
class TheoryParams:
    """Symbols for the closed-form mass and histogram-benefit formulas."""

    d: int = 1
    K: int = 1
    k: float = 1.0
    r: int = 1
    m: int = 1
    n: int = 1
    snr: float = 1.0
    N: int = 1

    def __post_init__(self):
        for name in ("d", "K", "k", "r", "m", "n", "snr", "N"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if self.k < 1:
            raise DomainError("smoothness order k must be at least 1")


def histogram_benefit(p: TheoryParams) -> tuple[float, bool]:
    """Attenuation factor c and whether histogram sharing helps.

    c = (sin(pi m / r) / (pi m / r))^(2n); sharing is beneficial exactly when
    1 + 1/snr < (N + 1) c, strictly.
    """
    ratio = p.m / p.r
    if p.m % p.r == 0:
        c = 0.0  # sin at an integer multiple of pi
    else:
        c = float((math.sin(math.pi * ratio) / (math.pi * ratio)) ** (2 * p.n))
    beneficial = (1.0 + 1.0 / p.snr) < (p.N + 1) * c
    return c, beneficial


def sample_spectrum_masses(
    d: int, k: float, n_draws: int, rng: Rng, truncation: int = 20
) -> np.ndarray:
    """Monte-Carlo per-degree squared mass of the random k-smooth signal.

    Each draw samples every basis coefficient with variance
    prod_i m_i^(-2k) / 2 (frequencies truncated) and reports the squared mass
    landing on each interaction degree, shape (n_draws, d + 1).  Decay makes
    the truncated tail negligible for k >= 1.
    """
    if d < 1:
        raise DomainError("dimension must be positive")
    if k < 1:
        raise DomainError("smoothness order must be at least 1")
    v = np.arange(1, truncation + 1, dtype=np.float64) ** (-2.0 * k) / 2.0
    masses = np.empty((n_draws, d + 1))
    masses[:, 0] = rng.normals(n_draws) ** 2
    for deg in range(1, d + 1):
        var = v
        for _ in range(deg - 1):
            var = np.outer(var, v).ravel()
        n_sets = math.comb(d, deg)
        n_coef = n_sets * var.size
        chunk = max(1, 2_000_000 // max(1, n_coef))
        for start in range(0, n_draws, chunk):
            stop = min(n_draws, start + chunk)
            z = rng.normals(stop - start, n_sets, var.size)
            masses[start:stop, deg] = np.einsum("nsj,nsj,j->n", z, z, var)
    return masses
