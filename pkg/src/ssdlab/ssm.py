"""Diagonal state-space model execution.

Three routes from inputs to outputs: the reference left-to-right
recurrence, the materialized T x T kernel, and the per-mode
scale/scan/scale pipeline that costs O(NTd).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .ss_matrix import LowerTriangularMatrix


@dataclass(frozen=True)
class DiagonalSsm:
    """Time-varying diagonal state-space parameters over T steps.

    ``a_diag[t, n]`` is the n-th diagonal entry of the step-t state matrix,
    ``b[t]`` and ``c[t]`` are the input and output weight rows. Row 0 of
    ``a_diag`` multiplies the all-zero initial state, so it carries no
    information; by convention it must be all ones (identity transition).
    """

    a_diag: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self) -> None:
        arrays = []
        for name in ("a_diag", "b", "c"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 2:
                raise ShapeMismatchError(f"{name} must be 2-D, got shape {arr.shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} entries must be finite")
            arrays.append(arr)
        if not (arrays[0].shape == arrays[1].shape == arrays[2].shape):
            raise ShapeMismatchError(
                "a_diag, b, c must share one (T, N) shape, got "
                f"{arrays[0].shape}, {arrays[1].shape}, {arrays[2].shape}"
            )
        if arrays[0].shape[0] < 1 or arrays[0].shape[1] < 1:
            raise ShapeMismatchError("T and N must both be at least 1")
        if np.any(arrays[0][0] != 1.0):
            raise ValueError("a_diag[0] must be all ones (identity first transition)")
        for name, arr in zip(("a_diag", "b", "c"), arrays):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def T(self) -> int:
        return self.a_diag.shape[0]

    @property
    def N(self) -> int:
        return self.a_diag.shape[1]

    def is_scalar_identity(self) -> bool:
        """True when every step's diagonal entries are all equal (exactly)."""
        return bool(np.all(self.a_diag == self.a_diag[:, :1]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "T": self.T,
                "N": self.N,
                "A_diag": self.a_diag.tolist(),
                "b": self.b.tolist(),
                "c": self.c.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "DiagonalSsm":
        obj = json.loads(text)
        ssm = cls(
            np.array(obj["A_diag"], dtype=float),
            np.array(obj["b"], dtype=float),
            np.array(obj["c"], dtype=float),
        )
        if ssm.T != obj["T"] or ssm.N != obj["N"]:
            raise ShapeMismatchError(
                f"declared (T, N)=({obj['T']}, {obj['N']}) does not match arrays "
                f"of shape ({ssm.T}, {ssm.N})"
            )
        return ssm


def _check_sequence(ssm: DiagonalSsm, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ShapeMismatchError(f"input sequence must be 2-D (T, d), got shape {x.shape}")
    if x.shape[0] != ssm.T:
        raise ShapeMismatchError(f"sequence has {x.shape[0]} steps, model has {ssm.T}")
    if x.shape[1] < 1:
        raise ShapeMismatchError("channel count d must be at least 1")
    return x


def forward_recurrence(ssm: DiagonalSsm, x: np.ndarray) -> np.ndarray:
    """Reference O(TNd) scan: h_t = a_t * h_{t-1} + b_t x_t, y_t = c_t h_t."""
    x = _check_sequence(ssm, x)
    n_steps, d = x.shape
    h = np.zeros((ssm.N, d))
    y = np.empty((n_steps, d))
    for t in range(n_steps):
        h = ssm.a_diag[t][:, None] * h + np.outer(ssm.b[t], x[t])
        y[t] = ssm.c[t] @ h
    return y


def materialize_kernel(ssm: DiagonalSsm) -> LowerTriangularMatrix:
    """Dense kernel with entries sum_n c[j,n] * (a[i+1,n]...a[j,n]) * b[i,n].

    Row j is produced from row j-1 by one gain multiplication per mode,
    so zero gains are handled exactly.
    """
    n_steps, n_modes = ssm.a_diag.shape
    m = np.zeros((n_steps, n_steps))
    # prods[n, s] holds the gain product from s+1 through the current row.
    prods = np.zeros((n_modes, n_steps))
    for j in range(n_steps):
        if j > 0:
            prods[:, :j] *= ssm.a_diag[j][:, None]
        prods[:, j] = 1.0
        m[j, : j + 1] = ssm.c[j] @ (prods[:, : j + 1] * ssm.b[: j + 1].T)
    return LowerTriangularMatrix(m)


def forward_materialized(ssm: DiagonalSsm, x: np.ndarray) -> np.ndarray:
    """Quadratic path: materialize the kernel, then one dense matmul."""
    x = _check_sequence(ssm, x)
    return materialize_kernel(ssm).values @ x


def scale_rows(scale: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Multiply row t of ``y`` by ``scale[t]``."""
    scale = np.asarray(scale, dtype=float)
    y = np.asarray(y, dtype=float)
    if scale.ndim != 1 or y.ndim != 2 or scale.shape[0] != y.shape[0]:
        raise ShapeMismatchError(
            f"need a length-T vector and a (T, d) matrix, got {scale.shape} and {y.shape}"
        )
    return scale[:, None] * y


def scan(gains: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Linear recurrence along rows: out_t = gains[t] * out_{t-1} + y_t.

    Row 0 is copied through; gains[0] is never read.
    """
    gains = np.asarray(gains, dtype=float)
    y = np.asarray(y, dtype=float)
    if gains.ndim != 1 or y.ndim != 2 or gains.shape[0] != y.shape[0]:
        raise ShapeMismatchError(
            f"need a length-T vector and a (T, d) matrix, got {gains.shape} and {y.shape}"
        )
    out = np.empty_like(y)
    out[0] = y[0]
    for t in range(1, y.shape[0]):
        out[t] = gains[t] * out[t - 1] + y[t]
    return out


def forward_ssd(ssm: DiagonalSsm, x: np.ndarray) -> np.ndarray:
    """O(NTd) path: per-mode scale, scan, scale, then an ordered reduction.

    Modes are accumulated in ascending order so the result is reproducible
    regardless of how the per-mode pipelines are scheduled.
    """
    x = _check_sequence(ssm, x)
    y = np.zeros_like(x)
    for n in range(ssm.N):
        z = scale_rows(ssm.b[:, n], x)
        h = scan(ssm.a_diag[:, n], z)
        y = y + scale_rows(ssm.c[:, n], h)
    return y


def random_instance(
    seed: int,
    T: int,
    N: int,
    d: int,
    a_abs: tuple[float, float] = (0.0, 2.0),
    scalar_identity: bool = False,
) -> tuple[DiagonalSsm, np.ndarray]:
    """Deterministic random model and input for a given seed.

    Gains have magnitude drawn uniformly from ``a_abs`` with random signs;
    weights are standard normal. Row 0 of the gains is forced to ones.
    """
    rng = np.random.default_rng(seed)
    lo, hi = a_abs
    if not (0.0 <= lo <= hi):
        raise ValueError(f"need 0 <= lo <= hi in a_abs, got {a_abs}")
    shape = (T, 1) if scalar_identity else (T, N)
    mags = rng.uniform(lo, hi, size=shape)
    signs = rng.choice([-1.0, 1.0], size=shape)
    a_diag = np.broadcast_to(mags * signs, (T, N)).copy()
    a_diag[0] = 1.0
    b = rng.standard_normal((T, N))
    c = rng.standard_normal((T, N))
    x = rng.standard_normal((T, d))
    return DiagonalSsm(a_diag, b, c), x


def sequence_to_csv(x: np.ndarray) -> str:
    x = np.asarray(x, dtype=float)
    lines = [",".join(repr(float(v)) for v in row) for row in np.atleast_2d(x)]
    return "\n".join(lines) + "\n"


def sequence_from_csv(text: str) -> np.ndarray:
    rows = [
        [float(field) for field in line.split(",")]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    return np.array(rows, dtype=float)


def sequence_to_json(x: np.ndarray) -> str:
    return json.dumps({"X": np.asarray(x, dtype=float).tolist()})


def sequence_from_json(text: str) -> np.ndarray:
    return np.array(json.loads(text)["X"], dtype=float)
