"""Duality constructions and decision procedures.

Turns diagonal state-space models into masked-attention factors (and
back), and decides when an arbitrary lower triangular kernel admits a
1-semiseparable masked-attention representation at a given width.

Orientation convention used everywhere: the kernel entry at (t, s) is
``c_t . (gain products) . b_s``, so output weights sit on the query side
(Q) and input weights on the key side (K).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._lowrank import balanced_factors, svd_with_rank
from .errors import (
    NotRepresentableError,
    NotScalarIdentityError,
    ReconstructionError,
    ShapeMismatchError,
    UnstableScalingError,
    ZeroGainError,
)
from .ss_matrix import (
    DEFAULT_EPS,
    LowerTriangularMatrix,
    MaskVector,
    _column_membership,
    _new_columns_detailed,
    blocks_from_cuts,
    diagonal_block_partition,
    one_ss,
)
from .ssm import DiagonalSsm, materialize_kernel

#: Largest allowed max/min magnitude ratio of cumulative gain products
#: before the full-rank rescaling is refused as numerically unstable.
STABILITY_RATIO = 1e12


@dataclass(frozen=True)
class RankOneMaskedTerm:
    """One mode's slice of a diagonal model: gains plus weight vectors."""

    mode: int
    a: np.ndarray
    c: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        for name in ("a", "c", "b"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise ShapeMismatchError(f"{name} must be 1-D, got shape {arr.shape}")
            arrays[name] = arr
        if not (arrays["a"].shape == arrays["c"].shape == arrays["b"].shape):
            raise ShapeMismatchError("a, c, b must share one length")
        for name, arr in arrays.items():
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.a.shape[0]


@dataclass(frozen=True)
class MaskedAttentionFactors:
    """A 1SS mask vector plus query/key factors realizing mask * (Q K^T)."""

    p: np.ndarray
    Q: np.ndarray
    K: np.ndarray

    def __post_init__(self) -> None:
        p = np.array(self.p, dtype=float)
        q = np.array(self.Q, dtype=float)
        k = np.array(self.K, dtype=float)
        if p.ndim != 1 or q.ndim != 2 or k.ndim != 2:
            raise ShapeMismatchError("p must be 1-D; Q and K must be 2-D")
        if q.shape != k.shape or q.shape[0] != p.shape[0]:
            raise ShapeMismatchError(
                f"inconsistent factor shapes: p {p.shape}, Q {q.shape}, K {k.shape}"
            )
        for name, arr in (("p", p), ("Q", q), ("K", k)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.p.shape[0]

    @property
    def N(self) -> int:
        return self.Q.shape[1]

    def materialize(self) -> LowerTriangularMatrix:
        """Dense value of mask * (Q K^T); exact zeros above the diagonal."""
        mask = one_ss(MaskVector(self.p)).values
        return LowerTriangularMatrix(mask * (self.Q @ self.K.T))

    def to_json(self) -> str:
        return json.dumps({"p": self.p.tolist(), "Q": self.Q.tolist(), "K": self.K.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "MaskedAttentionFactors":
        obj = json.loads(text)
        return cls(
            np.array(obj["p"], dtype=float),
            np.array(obj["Q"], dtype=float),
            np.array(obj["K"], dtype=float),
        )


def scalar_identity_dual(ssm: DiagonalSsm) -> MaskedAttentionFactors:
    """Masked-attention factors of a scalar-identity model.

    Requires every step's diagonal entries to be exactly equal across
    modes. The shared scalars become the mask gains, the output weights
    become Q and the input weights become K; the materialized factors
    equal the kernel exactly in exact arithmetic.
    """
    if not ssm.is_scalar_identity():
        bad = int(np.argmax(np.any(ssm.a_diag != ssm.a_diag[:, :1], axis=1)))
        raise NotScalarIdentityError(
            f"diagonal entries differ across modes at step {bad}"
        )
    return MaskedAttentionFactors(ssm.a_diag[:, 0].copy(), ssm.c.copy(), ssm.b.copy())


def attention_like_decomposition(ssm: DiagonalSsm) -> list[RankOneMaskedTerm]:
    """Per-mode rank-one masked terms; their materializations sum to the kernel."""
    return [
        RankOneMaskedTerm(n, ssm.a_diag[:, n].copy(), ssm.c[:, n].copy(), ssm.b[:, n].copy())
        for n in range(ssm.N)
    ]


def materialize_term(term: RankOneMaskedTerm) -> LowerTriangularMatrix:
    """Dense value of one mode: 1SS(a) * (c b^T) on the lower triangle."""
    mask = one_ss(MaskVector(term.a)).values
    return LowerTriangularMatrix(mask * np.outer(term.c, term.b))


def full_rank_one_ss_dual(ssm: DiagonalSsm) -> MaskedAttentionFactors:
    """All-ones-mask factors for a model whose gains are all nonzero.

    Rescales by cumulative gain products P: Q[t, n] = c[t, n] * P[t, n] and
    K[s, n] = b[s, n] / P[s, n], so Q K^T reproduces the kernel under the
    trivial causal mask. Refused when a gain is zero or when the products
    span more than STABILITY_RATIO in magnitude, since the rescaling then
    loses too much precision in floating point.
    """
    if np.any(ssm.a_diag[1:] == 0.0):
        step, mode = np.argwhere(ssm.a_diag[1:] == 0.0)[0] + np.array([1, 0])
        raise ZeroGainError(f"gain is zero at step {step}, mode {mode}")
    prods = np.cumprod(ssm.a_diag, axis=0)
    mags = np.abs(prods)
    if mags.max() > STABILITY_RATIO * mags.min():
        raise UnstableScalingError(
            f"cumulative products span a magnitude ratio of {mags.max() / mags.min():.3e}, "
            f"above the {STABILITY_RATIO:.0e} guard"
        )
    return MaskedAttentionFactors(np.ones(ssm.T), ssm.c * prods, ssm.b / prods)


def masked_attention_forward(factors: MaskedAttentionFactors, x: np.ndarray) -> np.ndarray:
    """Apply mask * (Q K^T) to an input sequence; dense O(T^2 (N+d)) path."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] != factors.T:
        raise ShapeMismatchError(
            f"input of shape {x.shape} does not match factors with T={factors.T}"
        )
    return factors.materialize().values @ x


@dataclass(frozen=True)
class BlockNewColumns:
    """New-column count of one diagonal block, rows [start, end)."""

    start: int
    end: int
    new_columns: int


def count_block_new_columns(
    m: LowerTriangularMatrix, eps: float = DEFAULT_EPS
) -> list[BlockNewColumns]:
    """Partition into diagonal blocks and count new columns inside each."""
    vals = m.values
    out = []
    for start, end in blocks_from_cuts(m.T, diagonal_block_partition(m, eps)):
        found, _ = _new_columns_detailed(vals[start:end, start:end], eps)
        out.append(BlockNewColumns(start, end, len(found)))
    return out


def has_one_ss_dual(m: LowerTriangularMatrix, width: int, eps: float = DEFAULT_EPS) -> bool:
    """Whether a width-``width`` masked-attention representation exists.

    True exactly when every diagonal block of the finest partition has at
    most ``width`` new columns.
    """
    if width < 1:
        raise ValueError(f"width must be at least 1, got {width}")
    return all(block.new_columns <= width for block in count_block_new_columns(m, eps))


def representability_report(
    m: LowerTriangularMatrix, width: int, eps: float = DEFAULT_EPS
) -> dict:
    """JSON-ready block/new-column report used by the CLI."""
    blocks = count_block_new_columns(m, eps)
    return {
        "blocks": [
            {"start": b.start, "end": b.end, "new_columns": b.new_columns} for b in blocks
        ],
        "representable": all(b.new_columns <= width for b in blocks),
    }


def construct_one_ss_dual(
    m: LowerTriangularMatrix, width: int, eps: float = DEFAULT_EPS
) -> MaskedAttentionFactors:
    """Build masked-attention factors for a representable kernel.

    Within each diagonal block, the strictly-upper entries are filled in
    column by column: a column that is not new gets the combination of the
    already-filled earlier columns given by its least-squares coefficients
    on the rows below the diagonal, while new columns keep zeros above.
    The filled block then has rank at most ``width`` and is factored by a
    truncated singular-value split, padded with zero columns when fewer
    directions are needed. The mask carries a zero at every block start
    and ones elsewhere.
    """
    if not has_one_ss_dual(m, width, eps):
        raise NotRepresentableError(
            f"matrix has a diagonal block with more than {width} new columns"
        )
    vals = m.values
    size = m.T
    p = np.ones(size)
    q_rows = np.zeros((size, width))
    k_rows = np.zeros((size, width))
    for start, end in blocks_from_cuts(size, diagonal_block_partition(m, eps)):
        p[start] = 0.0
        block = vals[start:end, start:end]
        filled = block.copy()
        for t in range(end - start):
            below = block[t:, :t]
            col = block[t:, t]
            is_new, _, _ = _column_membership(below, col, eps)
            if not is_new and t > 0 and np.linalg.norm(col) > 0.0:
                coeffs, *_ = np.linalg.lstsq(below, col, rcond=None)
                filled[:t, t] = filled[:t, :t] @ coeffs
        u, s, vh, rank = svd_with_rank(filled, eps)
        left, right = balanced_factors(u, s, vh, min(rank, width), width)
        q_rows[start:end] = left
        k_rows[start:end] = right.T
    factors = MaskedAttentionFactors(p, q_rows, k_rows)
    scale = float(np.linalg.norm(vals))
    residual = float(np.linalg.norm(factors.materialize().values - vals))
    if residual > eps * scale:
        raise ReconstructionError(
            f"re-materialization residual {residual:.3e} exceeds "
            f"{eps:.1e} * |M| = {eps * scale:.3e}"
        )
    return factors


def kernel_residual(ssm: DiagonalSsm, factors: MaskedAttentionFactors) -> float:
    """Relative Frobenius distance between the kernel and the factors' value."""
    kernel = materialize_kernel(ssm).values
    value = factors.materialize().values
    denom = float(np.linalg.norm(kernel))
    if denom == 0.0:
        return float(np.linalg.norm(value))
    return float(np.linalg.norm(value - kernel) / denom)
