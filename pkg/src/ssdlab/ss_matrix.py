"""Semiseparable-matrix primitives.

The 1SS operator, semiseparable rank, new-column detection, and
diagonal-block partitioning of dense lower triangular matrices.
All indices in this package are 0-based.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, SizeExceededError

#: Relative tolerance shared by every rank / span decision in the package.
DEFAULT_EPS = 1e-9

#: Largest T the combinatorial rank oracle will accept.
ORACLE_MAX_T = 12


@dataclass(frozen=True)
class LowerTriangularMatrix:
    """Dense T x T matrix whose strictly-upper entries are exactly zero.

    The zero pattern is validated on construction and the storage is
    frozen, so instances are safe to share across threads.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ShapeMismatchError(f"expected a square matrix, got shape {arr.shape}")
        if arr.shape[0] < 1:
            raise ShapeMismatchError("matrix size must be at least 1")
        if not np.isfinite(arr).all():
            raise ValueError("matrix entries must be finite")
        if np.any(arr[np.triu_indices(arr.shape[0], k=1)] != 0.0):
            raise ValueError("entries above the main diagonal must be exactly zero")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def T(self) -> int:
        return self.values.shape[0]

    def to_json(self) -> str:
        return json.dumps({"T": self.T, "rows": self.values.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "LowerTriangularMatrix":
        obj = json.loads(text)
        rows = np.array(obj["rows"], dtype=float)
        if rows.shape != (obj["T"], obj["T"]):
            raise ShapeMismatchError(
                f"declared T={obj['T']} does not match rows of shape {rows.shape}"
            )
        return cls(rows)

    def to_csv(self) -> str:
        # repr() is shortest round-trip formatting for Python floats.
        lines = [",".join(repr(float(v)) for v in row) for row in self.values]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "LowerTriangularMatrix":
        rows = [
            [float(field) for field in line.split(",")]
            for line in text.strip().splitlines()
            if line.strip()
        ]
        return cls(np.array(rows, dtype=float))


@dataclass(frozen=True)
class MaskVector:
    """Gain vector feeding the 1SS operator; entry 0 is never read."""

    a: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.a, dtype=float)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ShapeMismatchError(f"mask vector must be 1-D and nonempty, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("mask entries must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "a", arr)

    @property
    def T(self) -> int:
        return self.a.shape[0]

    def to_json(self) -> str:
        return json.dumps({"a": self.a.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MaskVector":
        return cls(np.array(json.loads(text)["a"], dtype=float))


def one_ss(mask: MaskVector) -> LowerTriangularMatrix:
    """Cumulative-product lower triangle of a gain vector.

    Entry (t, s) for t >= s is the product a[s+1] * ... * a[t], the empty
    product on the diagonal being 1. a[0] is never read. Rows are built by
    the recursion row_t = a[t] * row_{t-1}, which is exact for zero gains.
    """
    g = mask.a
    n = g.shape[0]
    m = np.zeros((n, n))
    row = np.zeros(n)
    for t in range(n):
        if t > 0:
            row[:t] = g[t] * row[:t]
        row[t] = 1.0
        m[t, : t + 1] = row[: t + 1]
    return LowerTriangularMatrix(m)


def numerical_rank(block: np.ndarray, eps: float = DEFAULT_EPS) -> int:
    """Count singular values above ``eps`` times the largest one."""
    block = np.atleast_2d(np.asarray(block, dtype=float))
    if block.size == 0:
        return 0
    s = np.linalg.svd(block, compute_uv=False)
    if s.size == 0 or s[0] <= 0.0:
        return 0
    return int(np.count_nonzero(s > eps * s[0]))


def semiseparable_rank(m: LowerTriangularMatrix, eps: float = DEFAULT_EPS) -> int:
    """Semiseparable rank: the largest rank over on-or-below-diagonal submatrices.

    Only the T maximal blocks ``M[t:, :t+1]`` need to be inspected: any
    submatrix with row set R and column set C on or below the diagonal has
    max(C) <= min(R), so it sits inside ``M[min(R):, :max(C)+1]`` and its
    rank is bounded by that block's rank.
    """
    vals = m.values
    best = 0
    for t in range(m.T):
        best = max(best, numerical_rank(vals[t:, : t + 1], eps))
    return best


def submatrix_rank_oracle(m: LowerTriangularMatrix, eps: float = DEFAULT_EPS) -> int:
    """Brute-force semiseparable rank, used only as a test oracle.

    Enumerates every contiguous on-or-below-diagonal block (all row ranges
    r0..r1 and column ranges c0..c1 with c1 <= r0) and maximizes the
    numerical rank. Arbitrary row/column subsets are covered because
    deleting rows or columns never increases rank, so each subset's rank is
    bounded by the contiguous block spanned by its extremes.
    """
    if m.T > ORACLE_MAX_T:
        raise SizeExceededError(f"oracle limited to T <= {ORACLE_MAX_T}, got T={m.T}")
    vals = m.values
    n = m.T
    best = 0
    for r0 in range(n):
        for r1 in range(r0 + 1, n + 1):
            for c1 in range(1, r0 + 2):
                for c0 in range(c1):
                    best = max(best, numerical_rank(vals[r0:r1, c0:c1], eps))
    return best


def _column_membership(
    below: np.ndarray, col: np.ndarray, eps: float
) -> tuple[bool, float, float]:
    """Least-squares span test for one column.

    Returns (is_new, residual, threshold). A column is new when the
    residual of fitting it with the earlier columns (restricted to the
    same rows) exceeds eps times the column norm. The empty-span
    convention at the first column makes any nonzero column new.
    """
    col_norm = float(np.linalg.norm(col))
    threshold = eps * col_norm
    if col_norm == 0.0:
        return False, 0.0, threshold
    if below.shape[1] == 0:
        return True, col_norm, threshold
    coeffs, *_ = np.linalg.lstsq(below, col, rcond=None)
    residual = float(np.linalg.norm(below @ coeffs - col))
    return residual > threshold, residual, threshold


def new_columns(m: LowerTriangularMatrix, eps: float = DEFAULT_EPS) -> list[int]:
    """Indices t whose below-diagonal part M[t:, t] leaves the span of M[t:, :t].

    A borderline decision (residual within a factor 10 of the threshold)
    emits a warning but still follows the threshold verdict.
    """
    found, _ = _new_columns_detailed(m.values, eps)
    return found


def _new_columns_detailed(vals: np.ndarray, eps: float) -> tuple[list[int], list[int]]:
    """new_columns plus the list of borderline column indices."""
    n = vals.shape[0]
    found: list[int] = []
    borderline: list[int] = []
    for t in range(n):
        is_new, residual, threshold = _column_membership(vals[t:, :t], vals[t:, t], eps)
        if is_new:
            found.append(t)
        if threshold > 0.0 and threshold / 10.0 <= residual <= threshold * 10.0:
            borderline.append(t)
            warnings.warn(
                f"borderline new-column decision at column {t}: "
                f"residual {residual:.3e} vs threshold {threshold:.3e}",
                stacklevel=3,
            )
    return found, borderline


def diagonal_block_partition(m: LowerTriangularMatrix, eps: float = DEFAULT_EPS) -> list[int]:
    """Cut positions of the finest diagonal-block partition.

    A cut before row i is valid when every entry of M[i:, :i] has magnitude
    at most eps times the largest magnitude in M, i.e. the below-left region
    is (numerically) zero. The finest partition is returned; merging valid
    blocks only sums their new-column counts, so finer is never wrong.
    """
    vals = m.values
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    cuts = []
    for i in range(1, m.T):
        region = vals[i:, :i]
        if region.size == 0 or np.max(np.abs(region)) <= eps * scale:
            cuts.append(i)
    return cuts


def blocks_from_cuts(size: int, cuts: list[int]) -> list[tuple[int, int]]:
    """Half-open (start, end) intervals between consecutive cuts."""
    bounds = [0, *cuts, size]
    return [(bounds[i], bounds[i + 1]) for i in range(len(bounds) - 1)]


def is_fine_mask(mask: MaskVector) -> bool:
    """True when every gain that the 1SS operator reads is nonzero.

    Entry 0 never appears in any mask entry, so fineness is decided on
    a[1:] only.
    """
    return bool(np.all(mask.a[1:] != 0.0))
