"""Dense and block-diagonal linear algebra plus a deterministic seeded RNG.

Everything above this module (MLPs, the additive model, the detector) builds
on these few primitives.  Two properties matter more than raw speed:

* 64-bit floats everywhere, so finite-difference gradient checks stay tight;
* a pinned summation order for every product, so the three model execution
  modes can be compared for *exact* equality rather than within a tolerance.

:func:`matmul` therefore accumulates over the inner dimension in ascending
index order, one rounded multiply and one rounded add per term, exactly as a
scalar triple loop would.  BLAS kernels reorder partial sums (and may fuse
multiply-adds), which breaks bit-level reproducibility between differently
shaped calls; they are deliberately not used on any path whose output is
subject to an exact-equality contract.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeMismatchError

__all__ = [
    "Matrix",
    "as_matrix",
    "matmul",
    "BlockDiagMatrix",
    "CsrMatrix",
    "block_forward",
    "to_csr",
    "from_csr",
    "Rng",
]

Matrix = np.ndarray
"""A dense 2-D float64 array in row-major (C) order."""


def as_matrix(values, name: str = "matrix") -> Matrix:
    """Coerce ``values`` to a contiguous 2-D float64 array and validate it.

    Raises :class:`ShapeMismatchError` for wrong dimensionality and
    :class:`FormatError` if any entry is NaN or infinite.
    """
    arr = np.ascontiguousarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeMismatchError(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.isfinite(arr).all():
        raise FormatError(f"{name} contains non-finite values")
    return arr


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Matrix product with ascending-index accumulation over the inner dim.

    Bit-identical to the scalar triple loop ``acc += a[i,t] * b[t,j]`` for
    t = 0..k-1: each term is rounded once by the multiply and once by the
    running add, in the same order.
    """
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatchError(
            f"matmul needs 2-D operands, got {a.ndim}-D and {b.ndim}-D"
        )
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(
            f"inner dimensions differ: {a.shape} x {b.shape}"
        )
    n, k = a.shape
    m = b.shape[1]
    out = np.zeros((n, m))
    tmp = np.empty((n, m))
    for t in range(k):
        np.multiply(a[:, t, None], b[t, None, :], out=tmp)
        np.add(out, tmp, out=out)
    return out


@dataclass(frozen=True)
class BlockDiagMatrix:
    """A block-diagonal matrix stored as its diagonal blocks.

    ``row_offsets``/``col_offsets`` are prefix sums with a leading zero, so
    block ``b`` occupies rows ``row_offsets[b]:row_offsets[b+1]`` and columns
    ``col_offsets[b]:col_offsets[b+1]`` of the equivalent dense matrix; all
    other entries are zero.
    """

    blocks: tuple[Matrix, ...]
    row_offsets: np.ndarray
    col_offsets: np.ndarray

    @classmethod
    def from_blocks(cls, blocks) -> "BlockDiagMatrix":
        mats = tuple(as_matrix(b, name=f"block {i}") for i, b in enumerate(blocks))
        row_off = np.zeros(len(mats) + 1, dtype=np.int64)
        col_off = np.zeros(len(mats) + 1, dtype=np.int64)
        for i, m in enumerate(mats):
            row_off[i + 1] = row_off[i] + m.shape[0]
            col_off[i + 1] = col_off[i] + m.shape[1]
        return cls(mats, row_off, col_off)

    @property
    def n_blocks(self) -> int:
        return len(self.blocks)

    @property
    def rows(self) -> int:
        return int(self.row_offsets[-1])

    @property
    def cols(self) -> int:
        return int(self.col_offsets[-1])

    @property
    def nnz(self) -> int:
        """Stored entry count: sum of block areas (zeros inside blocks count)."""
        return sum(b.shape[0] * b.shape[1] for b in self.blocks)

    def dense(self) -> Matrix:
        """Materialize the equivalent dense matrix."""
        out = np.zeros((self.rows, self.cols))
        for i, blk in enumerate(self.blocks):
            r0, r1 = self.row_offsets[i], self.row_offsets[i + 1]
            c0, c1 = self.col_offsets[i], self.col_offsets[i + 1]
            out[r0:r1, c0:c1] = blk
        return out

    def copy(self) -> "BlockDiagMatrix":
        return BlockDiagMatrix(
            tuple(b.copy() for b in self.blocks),
            self.row_offsets.copy(),
            self.col_offsets.copy(),
        )


def block_forward(w: BlockDiagMatrix, x: Matrix) -> Matrix:
    """Apply a block-diagonal weight matrix to a batch: ``x @ dense(w)``.

    ``x`` holds each block's input segment contiguously (block b's inputs in
    columns ``row_offsets[b]:row_offsets[b+1]``); the output lays block
    segments out the same way.  Each block segment is computed by
    :func:`matmul`, so the result equals a per-block loop exactly.
    """
    if x.ndim != 2:
        raise ShapeMismatchError(f"batch must be 2-D, got {x.ndim}-D")
    if x.shape[1] != w.rows:
        raise ShapeMismatchError(
            f"batch has {x.shape[1]} columns but blocks expect {w.rows}"
        )
    out = np.empty((x.shape[0], w.cols))
    for i, blk in enumerate(w.blocks):
        r0, r1 = w.row_offsets[i], w.row_offsets[i + 1]
        c0, c1 = w.col_offsets[i], w.col_offsets[i + 1]
        out[:, c0:c1] = matmul(x[:, r0:r1], blk)
    return out


@dataclass(frozen=True)
class CsrMatrix:
    """Compressed-sparse-row storage.

    ``values[row_starts[r]:row_starts[r+1]]`` are row r's stored entries and
    ``col_indices`` names their columns (strictly increasing within a row).
    Zeros *inside* diagonal blocks are stored explicitly (the pattern encodes
    the block structure, not value sparsity), so block offsets are recoverable
    from the pattern alone.
    """

    values: np.ndarray
    col_indices: np.ndarray
    row_starts: np.ndarray
    rows: int
    cols: int

    def __post_init__(self):
        if len(self.row_starts) != self.rows + 1:
            raise FormatError(
                f"row_starts needs {self.rows + 1} entries, got {len(self.row_starts)}"
            )
        if self.rows and self.row_starts[0] != 0:
            raise FormatError("row_starts must begin at 0")
        if np.any(np.diff(self.row_starts) < 0):
            raise FormatError("row_starts must be nondecreasing")
        if len(self.row_starts) and self.row_starts[-1] != len(self.values):
            raise FormatError("row_starts must end at the value count")
        if len(self.col_indices) != len(self.values):
            raise FormatError("col_indices and values lengths differ")
        if len(self.col_indices) and (
            self.col_indices.min() < 0 or self.col_indices.max() >= self.cols
        ):
            raise FormatError("col_indices out of range")

    @property
    def nnz(self) -> int:
        return len(self.values)

    def dense(self) -> Matrix:
        out = np.zeros((self.rows, self.cols))
        for r in range(self.rows):
            s, e = self.row_starts[r], self.row_starts[r + 1]
            out[r, self.col_indices[s:e]] = self.values[s:e]
        return out


def to_csr(w: BlockDiagMatrix) -> CsrMatrix:
    """Convert to CSR. Global rows are block rows in order, so each block's
    entries land contiguously in ``values`` in row-major order."""
    if w.n_blocks == 0:
        return CsrMatrix(
            values=np.empty(0),
            col_indices=np.empty(0, dtype=np.int64),
            row_starts=np.zeros(1, dtype=np.int64),
            rows=0,
            cols=0,
        )
    values = np.concatenate([blk.ravel() for blk in w.blocks])
    col_parts = []
    width_per_row = []
    for i, blk in enumerate(w.blocks):
        c0, c1 = w.col_offsets[i], w.col_offsets[i + 1]
        col_parts.append(np.tile(np.arange(c0, c1, dtype=np.int64), blk.shape[0]))
        width_per_row.extend([blk.shape[1]] * blk.shape[0])
    col_indices = np.concatenate(col_parts)
    row_starts = np.zeros(w.rows + 1, dtype=np.int64)
    np.cumsum(width_per_row, out=row_starts[1:])
    return CsrMatrix(values, col_indices, row_starts, w.rows, w.cols)


def from_csr(
    c: CsrMatrix, row_offsets: np.ndarray, col_offsets: np.ndarray
) -> BlockDiagMatrix:
    """Rebuild a BlockDiagMatrix from CSR storage and block offsets.

    Validates that the stored pattern is exactly block-diagonal with respect
    to the offsets; raises :class:`FormatError` otherwise.  The returned
    blocks are views into ``c.values`` (zero-copy).
    """
    row_offsets = np.asarray(row_offsets, dtype=np.int64)
    col_offsets = np.asarray(col_offsets, dtype=np.int64)
    if len(row_offsets) != len(col_offsets):
        raise FormatError("row and column offset lists differ in length")
    if len(row_offsets) == 0 or row_offsets[0] != 0 or col_offsets[0] != 0:
        raise FormatError("offsets must start at 0")
    if row_offsets[-1] != c.rows or col_offsets[-1] != c.cols:
        raise FormatError(
            f"offsets cover {row_offsets[-1]}x{col_offsets[-1]} "
            f"but matrix is {c.rows}x{c.cols}"
        )
    blocks = []
    n_blocks = len(row_offsets) - 1
    for b in range(n_blocks):
        r0, r1 = row_offsets[b], row_offsets[b + 1]
        c0, c1 = col_offsets[b], col_offsets[b + 1]
        height, width = int(r1 - r0), int(c1 - c0)
        if height < 1 or width < 1:
            raise FormatError(f"block {b} has nonpositive size")
        start = c.row_starts[r0]
        end = c.row_starts[r1]
        if end - start != height * width:
            raise FormatError(
                f"block {b}: stored entry count does not match a full "
                f"{height}x{width} block"
            )
        expect_cols = np.tile(np.arange(c0, c1, dtype=np.int64), height)
        if not np.array_equal(c.col_indices[start:end], expect_cols):
            raise FormatError(
                f"block {b}: pattern is not block-diagonal for these offsets"
            )
        blocks.append(c.values[start:end].reshape(height, width))
    return BlockDiagMatrix(tuple(blocks), row_offsets, col_offsets)


_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class Rng:
    """SplitMix64: a tiny, platform-independent 64-bit generator.

    State advances by a fixed odd constant per draw and the output is a
    bijective mix of the state, so the i-th draw from seed s is
    ``mix(s + (i+1)*gamma)``, which also makes bulk generation vectorizable
    without changing the stream.  Identical seeds give identical streams on
    every platform; the seed-0 stream is pinned to the published reference
    vector in the test suite.
    """

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    @staticmethod
    def _mix(z: int) -> int:
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def next_u64(self) -> int:
        """Next raw 64-bit draw."""
        self._state = (self._state + _GAMMA) & _MASK64
        return self._mix(self._state)

    def next_float(self) -> float:
        """Uniform draw in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def _raw_array(self, n: int) -> np.ndarray:
        """Vectorized equivalent of n calls to :meth:`next_u64`."""
        if n == 0:
            return np.empty(0, dtype=np.uint64)
        with np.errstate(over="ignore"):
            steps = np.arange(1, n + 1, dtype=np.uint64)
            z = np.uint64(self._state) + steps * np.uint64(_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
            z = z ^ (z >> np.uint64(31))
        self._state = (self._state + n * _GAMMA) & _MASK64
        return z

    def floats(self, *shape: int) -> np.ndarray:
        """Array of uniform [0, 1) draws with the given shape."""
        n = int(np.prod(shape)) if shape else 1
        u = self._raw_array(n)
        out = (u >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return out.reshape(shape) if shape else out[0]

    def uniform(self, low: float, high: float, shape: tuple[int, ...]) -> np.ndarray:
        """Array of uniform draws in [low, high)."""
        return low + (high - low) * self.floats(*shape)

    def normals(self, *shape: int) -> np.ndarray:
        """Standard normal draws via Box-Muller on paired uniforms."""
        n = int(np.prod(shape)) if shape else 1
        m = (n + 1) // 2
        u1 = self.floats(m)
        u2 = self.floats(m)
        r = np.sqrt(-2.0 * np.log(1.0 - u1))  # 1-u1 avoids log(0)
        theta = 2.0 * np.pi * u2
        z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]
        return z.reshape(shape) if shape else z[0]

    def permutation(self, n: int) -> np.ndarray:
        """Deterministic permutation of range(n): stable argsort of raw draws."""
        keys = self._raw_array(n)
        return np.argsort(keys, kind="stable")

    def subsample(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n) (ascending), without replacement."""
        if k >= n:
            return np.arange(n)
        return np.sort(self.permutation(n)[:k])

    def spawn(self) -> "Rng":
        """Independent child generator seeded from this stream."""
        return Rng(self.next_u64())
