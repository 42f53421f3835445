"""Deterministic truncated singular-value factorizations (internal)."""

from __future__ import annotations

import numpy as np


def svd_with_rank(block: np.ndarray, eps: float) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Full SVD plus the numerical rank at relative tolerance ``eps``.

    Singular-vector signs are normalized so each left vector's
    largest-magnitude entry is positive, which pins down an otherwise
    arbitrary sign and keeps outputs reproducible.
    """
    block = np.atleast_2d(np.asarray(block, dtype=float))
    u, s, vh = np.linalg.svd(block, full_matrices=False)
    for i in range(s.shape[0]):
        col = u[:, i]
        j = int(np.argmax(np.abs(col)))
        if col[j] < 0.0:
            u[:, i] = -u[:, i]
            vh[i, :] = -vh[i, :]
    if s.size == 0 or s[0] <= 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s > eps * s[0]))
    return u, s, vh, rank


def balanced_factors(
    u: np.ndarray, s: np.ndarray, vh: np.ndarray, rank: int, width: int
) -> tuple[np.ndarray, np.ndarray]:
    """Split an SVD as (U sqrt(S), sqrt(S) Vh) truncated to ``rank``.

    Both factors are zero-padded to ``width`` columns/rows, so exactly the
    leading ``rank`` columns of the left factor and rows of the right
    factor are nonzero.
    """
    roots = np.sqrt(s[:rank])
    left = np.zeros((u.shape[0], width))
    right = np.zeros((width, vh.shape[1]))
    left[:, :rank] = u[:, :rank] * roots
    right[:rank, :] = roots[:, None] * vh[:rank, :]
    return left, right
