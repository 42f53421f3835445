"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from ssdlab.ss_matrix import LowerTriangularMatrix, MaskVector, one_ss


def rel_fro(a: np.ndarray, b: np.ndarray) -> float:
    """Relative Frobenius distance with a zero-safe denominator."""
    denom = max(np.linalg.norm(a), np.linalg.norm(b))
    if denom == 0.0:
        return float(np.linalg.norm(a - b))
    return float(np.linalg.norm(a - b) / denom)


def random_lower_triangular(seed: int, size: int) -> LowerTriangularMatrix:
    rng = np.random.default_rng(seed)
    return LowerTriangularMatrix(np.tril(rng.standard_normal((size, size))))


def representable_matrix(seed: int, size: int, width: int, blocks: int = 1) -> LowerTriangularMatrix:
    """Random kernel of the form mask * (Q K^T) with ``blocks`` diagonal blocks.

    The mask gains are nonzero inside blocks (magnitude in [0.5, 2]) and
    zero at interior block starts, so the construction is representable at
    width ``width`` by design.
    """
    rng = np.random.default_rng(seed)
    gains = rng.uniform(0.5, 2.0, size) * rng.choice([-1.0, 1.0], size)
    if blocks > 1:
        starts = rng.choice(np.arange(1, size), size=blocks - 1, replace=False)
        gains[starts] = 0.0
    mask = one_ss(MaskVector(gains)).values
    q = rng.standard_normal((size, width))
    k = rng.standard_normal((size, width))
    return LowerTriangularMatrix(mask * (q @ k.T))
