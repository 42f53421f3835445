"""Constructive extraction of general state-space representations.

Any lower triangular matrix whose lower-left blocks have rank at most N
factors as c_j' A^j ... A^{i+1} b_i with full (not necessarily diagonal)
transition matrices. This module recovers such a representation from the
dense matrix via per-block rank factorizations chained by transition
solves, and materializes representations back to dense form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ._lowrank import balanced_factors, svd_with_rank
from .errors import (
    InconsistentTransitionError,
    RankExceedsWidthError,
    ShapeMismatchError,
)
from .ss_matrix import DEFAULT_EPS, LowerTriangularMatrix


@dataclass(frozen=True)
class GeneralSssRepresentation:
    """Full transition matrices plus weight rows, with per-step block ranks.

    ``A[t]`` is the transition applied when advancing to step t; ``A[0]``
    multiplies the zero initial state and is the identity by convention.
    ``r[t]`` is the rank of the lower-left block anchored at step t and
    bounds the live corner of the neighbouring transitions.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    r: tuple[int, ...]

    def __post_init__(self) -> None:
        a = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        c = np.array(self.c, dtype=float)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ShapeMismatchError(f"A must be (T, N, N), got shape {a.shape}")
        steps, width = a.shape[0], a.shape[1]
        if b.shape != (steps, width) or c.shape != (steps, width):
            raise ShapeMismatchError(
                f"b and c must be ({steps}, {width}), got {b.shape} and {c.shape}"
            )
        if steps < 1 or width < 1:
            raise ShapeMismatchError("T and N must both be at least 1")
        if np.any(a[0] != np.eye(width)):
            raise ValueError("A[0] must be the identity (it multiplies the zero state)")
        ranks = tuple(int(v) for v in self.r)
        if len(ranks) != steps:
            raise ShapeMismatchError(f"r must have length {steps}, got {len(ranks)}")
        for t, rank in enumerate(ranks):
            if not 0 <= rank <= min(width, steps - t, t + 1):
                raise ValueError(
                    f"r[{t}]={rank} outside [0, min(N, T-t, t+1)] for T={steps}, N={width}"
                )
        for name, arr in (("A", a), ("b", b), ("c", c)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "r", ranks)

    @property
    def T(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    def has_exact_padding(self) -> bool:
        """Whether every A[t] (t >= 1) is zero outside its leading r[t] x r[t-1] corner."""
        for t in range(1, self.T):
            rows, cols = self.r[t], self.r[t - 1]
            if np.any(self.A[t][rows:, :] != 0.0) or np.any(self.A[t][:, cols:] != 0.0):
                return False
        return True

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.T,
                "N": self.N,
                "A": self.A.tolist(),
                "b": self.b.tolist(),
                "c": self.c.tolist(),
                "r": list(self.r),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GeneralSssRepresentation":
        obj = json.loads(text)
        rep = cls(
            np.array(obj["A"], dtype=float),
            np.array(obj["b"], dtype=float),
            np.array(obj["c"], dtype=float),
            tuple(obj["r"]),
        )
        if rep.T != obj["T"] or rep.N != obj["N"]:
            raise ShapeMismatchError(
                f"declared (T, N)=({obj['T']}, {obj['N']}) does not match arrays"
            )
        return rep


def materialize_sss(rep: GeneralSssRepresentation) -> LowerTriangularMatrix:
    """Dense matrix with entries c_j' A^j ... A^{i+1} b_i, column by column.

    Each column keeps a running product vector, so the cost is O(T^2 N^2).
    """
    steps = rep.T
    m = np.zeros((steps, steps))
    for i in range(steps):
        v = rep.b[i].copy()
        m[i, i] = rep.c[i] @ v
        for j in range(i + 1, steps):
            v = rep.A[j] @ v
            m[j, i] = rep.c[j] @ v
    return LowerTriangularMatrix(m)


def rank_factor_step(
    m: LowerTriangularMatrix, t: int, width: int, eps: float = DEFAULT_EPS
) -> tuple[np.ndarray, np.ndarray, int]:
    """Balanced rank factorization of the lower-left block anchored at step t.

    Returns (W, U, r) with W of shape (T-t, width), U of shape
    (width, t+1) and W @ U reproducing ``M[t:, :t+1]``. Exactly the
    leading r columns of W and rows of U are nonzero. Raises when the
    block's numerical rank exceeds ``width``.
    """
    if not 0 <= t < m.T:
        raise ValueError(f"step index {t} outside [0, {m.T})")
    block = m.values[t:, : t + 1]
    u, s, vh, rank = svd_with_rank(block, eps)
    if rank > width:
        raise RankExceedsWidthError(
            f"block at step {t} has rank {rank}, above the requested width {width}"
        )
    left, right = balanced_factors(u, s, vh, rank, width)
    return left, right, rank


def solve_transition(
    w_next: np.ndarray,
    w_trunc: np.ndarray,
    r_next: int,
    r_cur: int,
    eps: float = DEFAULT_EPS,
) -> np.ndarray:
    """Transition matrix A with w_next @ A = w_trunc, zero-padded exactly.

    ``w_trunc`` is the previous step's row factor with its first row
    dropped; its columns live in the span of ``w_next`` whenever the source
    matrix is semiseparable, so the least-squares solution through the
    pseudo-inverse reproduces it. Entries outside the leading
    r_next x r_cur corner are forced to exact zeros.
    """
    w_next = np.asarray(w_next, dtype=float)
    w_trunc = np.asarray(w_trunc, dtype=float)
    if w_next.shape != w_trunc.shape:
        raise ShapeMismatchError(
            f"factor shapes {w_next.shape} and {w_trunc.shape} must match"
        )
    width = w_next.shape[1]
    trans = np.linalg.pinv(w_next, rcond=eps) @ w_trunc
    trans[r_next:, :] = 0.0
    trans[:, r_cur:] = 0.0
    scale = float(np.linalg.norm(w_trunc))
    residual = float(np.linalg.norm(w_next @ trans - w_trunc))
    if residual > eps * scale:
        raise InconsistentTransitionError(
            f"row-factor residual {residual:.3e} exceeds {eps:.1e} * |W'| = {eps * scale:.3e}"
        )
    return trans


def extract_sss(
    m: LowerTriangularMatrix, width: int, eps: float = DEFAULT_EPS
) -> GeneralSssRepresentation:
    """Recover a width-``width`` representation of a semiseparable matrix.

    Factors every lower-left block as W U, reads the weights off the
    factor edges (c from W's first row, b from U's last column), and
    chains consecutive factorizations with transition solves. Each
    transition is verified on both sides: w-side by construction inside
    ``solve_transition``, u-side against the next step's column factor.
    """
    if width < 1:
        raise ValueError(f"width must be at least 1, got {width}")
    steps = m.T
    factored = [rank_factor_step(m, t, width, eps) for t in range(steps)]
    ranks = tuple(r for _, _, r in factored)
    b_rows = np.zeros((steps, width))
    c_rows = np.zeros((steps, width))
    trans = np.zeros((steps, width, width))
    trans[0] = np.eye(width)
    for t, (w_fac, u_fac, _) in enumerate(factored):
        c_rows[t] = w_fac[0, :]
        b_rows[t] = u_fac[:, -1]
    for t in range(steps - 1):
        w_next = factored[t + 1][0]
        w_trunc = factored[t][0][1:, :]
        a_t = solve_transition(w_next, w_trunc, ranks[t + 1], ranks[t], eps)
        u_cur = factored[t][1]
        u_next_trim = factored[t + 1][1][:, : t + 1]
        scale = float(np.linalg.norm(u_next_trim))
        residual = float(np.linalg.norm(a_t @ u_cur - u_next_trim))
        if residual > eps * scale:
            raise InconsistentTransitionError(
                f"column-factor residual {residual:.3e} at step {t + 1} exceeds "
                f"{eps:.1e} * |U'| = {eps * scale:.3e}"
            )
        trans[t + 1] = a_t
    return GeneralSssRepresentation(trans, b_rows, c_rows, ranks)


def random_representation(seed: int, T: int, N: int) -> GeneralSssRepresentation:
    """Deterministic random representation with the exact padding pattern.

    Block ranks are set to their maximum min(N, T-t, t+1); transitions are
    normalized to spectral norms in [0.3, 1.1] so long products neither
    explode nor vanish.
    """
    rng = np.random.default_rng(seed)
    ranks = tuple(min(N, T - t, t + 1) for t in range(T))
    trans = np.zeros((T, N, N))
    trans[0] = np.eye(N)
    for t in range(1, T):
        g = rng.standard_normal((N, N))
        g *= rng.uniform(0.3, 1.1) / np.linalg.norm(g, 2)
        g[ranks[t] :, :] = 0.0
        g[:, ranks[t - 1] :] = 0.0
        trans[t] = g
    b = rng.standard_normal((T, N))
    c = rng.standard_normal((T, N))
    return GeneralSssRepresentation(trans, b, c, ranks)
