"""Operation-count instrumentation and scaling experiments.

Counts come from running dedicated counting kernels whose scalars are
wrapped so every multiplication and addition tallies on a shared counter;
nothing is estimated from closed-form formulas. Counting kernels use
uniform loops with zero-initialized accumulators (the first scan step
multiplies the zero carry, reductions start from zeros), so the three
paths charge the same operation slots they would in a branch-free
implementation and the linear path counts scale exactly with T, N and d.
Timing runs use the production numpy paths and are kept separate so the
wrappers cannot distort them.

Counting convention: ``multiply_adds`` tallies multiplications (each is
one multiply-accumulate slot); ``additions`` tallies scalar additions.
Peak live elements charge the model parameters plus every intermediate
the algorithm materializes, with all per-mode intermediates of the linear
path held simultaneously; the caller-owned input sequence is not charged.
A streaming implementation that drops each mode's intermediates after its
reduction step would need only O(Td) extra, which the all-live model here
deliberately does not assume.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGridError
from .ssm import (
    DiagonalSsm,
    forward_materialized,
    forward_recurrence,
    forward_ssd,
    random_instance,
)

PATHS = ("recurrence", "ssd", "materialized")


class FlopCounter:
    """Mutable tally of scalar operations and live-element watermark."""

    __slots__ = ("madds", "adds", "live", "peak_live")

    def __init__(self) -> None:
        self.madds = 0
        self.adds = 0
        self.live = 0
        self.peak_live = 0

    def alloc(self, count: int) -> None:
        self.live += count
        if self.live > self.peak_live:
            self.peak_live = self.live

    def release(self, count: int) -> None:
        self.live -= count


class CountedValue:
    """Float wrapper that reports each multiply and add to a FlopCounter."""

    __slots__ = ("value", "counter")

    def __init__(self, value: float, counter: FlopCounter) -> None:
        self.value = value
        self.counter = counter

    def __mul__(self, other: "CountedValue") -> "CountedValue":
        self.counter.madds += 1
        return CountedValue(self.value * other.value, self.counter)

    def __add__(self, other: "CountedValue") -> "CountedValue":
        self.counter.adds += 1
        return CountedValue(self.value + other.value, self.counter)


@dataclass(frozen=True)
class FlopReport:
    """Exact operation tallies and peak live elements for one run."""

    path: str
    T: int
    N: int
    d: int
    multiply_adds: int
    additions: int
    peak_live_elements: int
    wall_time_s: float

    def as_dict(self, timing: bool = True) -> dict:
        out = {
            "path": self.path,
            "T": self.T,
            "N": self.N,
            "d": self.d,
            "multiply_adds": self.multiply_adds,
            "additions": self.additions,
            "peak_live_elements": self.peak_live_elements,
        }
        if timing:
            out["wall_time_s"] = self.wall_time_s
        return out


def _wrap(arr: np.ndarray, counter: FlopCounter) -> list[list[CountedValue]]:
    return [[CountedValue(float(v), counter) for v in row] for row in np.atleast_2d(arr)]


def _unwrap(grid: list[list[CountedValue]]) -> np.ndarray:
    return np.array([[v.value for v in row] for row in grid])


def _counted_ssd(ssm: DiagonalSsm, x: np.ndarray, counter: FlopCounter) -> np.ndarray:
    steps, modes = ssm.T, ssm.N
    d = x.shape[1]
    a = _wrap(ssm.a_diag, counter)
    b = _wrap(ssm.b, counter)
    c = _wrap(ssm.c, counter)
    counter.alloc(3 * steps * modes)
    xg = _wrap(x, counter)

    scaled = []
    for n in range(modes):
        z = [[b[t][n] * xg[t][s] for s in range(d)] for t in range(steps)]
        counter.alloc(steps * d)
        scaled.append(z)
    carried = []
    for n in range(modes):
        h: list[list[CountedValue]] = [[None] * d for _ in range(steps)]  # type: ignore[list-item]
        for s in range(d):
            carry = CountedValue(0.0, counter)
            for t in range(steps):
                carry = a[t][n] * carry + scaled[n][t][s]
                h[t][s] = carry
        counter.alloc(steps * d)
        carried.append(h)
    weighted = []
    for n in range(modes):
        y_n = [[c[t][n] * carried[n][t][s] for s in range(d)] for t in range(steps)]
        counter.alloc(steps * d)
        weighted.append(y_n)
    acc = [[CountedValue(0.0, counter) for _ in range(d)] for _ in range(steps)]
    counter.alloc(steps * d)
    for n in range(modes):
        for t in range(steps):
            for s in range(d):
                acc[t][s] = acc[t][s] + weighted[n][t][s]
    result = _unwrap(acc)
    counter.release(3 * steps * modes + 3 * modes * steps * d + steps * d)
    return result


def _counted_recurrence(ssm: DiagonalSsm, x: np.ndarray, counter: FlopCounter) -> np.ndarray:
    steps, modes = ssm.T, ssm.N
    d = x.shape[1]
    a = _wrap(ssm.a_diag, counter)
    b = _wrap(ssm.b, counter)
    c = _wrap(ssm.c, counter)
    counter.alloc(3 * steps * modes)
    xg = _wrap(x, counter)
    h = [[CountedValue(0.0, counter) for _ in range(d)] for _ in range(modes)]
    counter.alloc(modes * d)
    y: list[list[CountedValue]] = [[None] * d for _ in range(steps)]  # type: ignore[list-item]
    counter.alloc(steps * d)
    for t in range(steps):
        for n in range(modes):
            for s in range(d):
                h[n][s] = a[t][n] * h[n][s] + b[t][n] * xg[t][s]
        for s in range(d):
            out = CountedValue(0.0, counter)
            for n in range(modes):
                out = out + c[t][n] * h[n][s]
            y[t][s] = out
    result = _unwrap(y)
    counter.release(3 * steps * modes + modes * d + steps * d)
    return result


def _counted_materialized(ssm: DiagonalSsm, x: np.ndarray, counter: FlopCounter) -> np.ndarray:
    steps, modes = ssm.T, ssm.N
    d = x.shape[1]
    a = _wrap(ssm.a_diag, counter)
    b = _wrap(ssm.b, counter)
    c = _wrap(ssm.c, counter)
    counter.alloc(3 * steps * modes)
    xg = _wrap(x, counter)
    zero = CountedValue(0.0, counter)
    kernel: list[list[CountedValue]] = [[zero] * steps for _ in range(steps)]
    counter.alloc(steps * steps)
    counter.alloc(modes)  # running product vector
    for i in range(steps):
        v = [b[i][n] for n in range(modes)]
        for j in range(i, steps):
            if j > i:
                v = [a[j][n] * v[n] for n in range(modes)]
            entry = CountedValue(0.0, counter)
            for n in range(modes):
                entry = entry + c[j][n] * v[n]
            kernel[j][i] = entry
    y: list[list[CountedValue]] = [[None] * d for _ in range(steps)]  # type: ignore[list-item]
    counter.alloc(steps * d)
    for t in range(steps):
        for s in range(d):
            out = CountedValue(0.0, counter)
            for i in range(t + 1):
                out = out + kernel[t][i] * xg[i][s]
            y[t][s] = out
    result = _unwrap(y)
    counter.release(3 * steps * modes + steps * steps + modes + steps * d)
    return result


_COUNTED = {
    "recurrence": _counted_recurrence,
    "ssd": _counted_ssd,
    "materialized": _counted_materialized,
}

_PRODUCTION = {
    "recurrence": forward_recurrence,
    "ssd": forward_ssd,
    "materialized": forward_materialized,
}


def count_flops(path: str, T: int, N: int, d: int, seed: int) -> FlopReport:
    """Run one path on a seeded instance in counting mode, timing separately.

    The tallies depend only on (path, T, N, d); the seed fixes the values
    the production run is timed on.
    """
    if path not in _COUNTED:
        raise ValueError(f"unknown path {path!r}, expected one of {PATHS}")
    ssm, x = random_instance(seed, T, N, d)
    counter = FlopCounter()
    _COUNTED[path](ssm, x, counter)
    start = time.perf_counter()
    _PRODUCTION[path](ssm, x)
    wall = time.perf_counter() - start
    return FlopReport(
        path=path,
        T=T,
        N=N,
        d=d,
        multiply_adds=counter.madds,
        additions=counter.adds,
        peak_live_elements=counter.peak_live,
        wall_time_s=wall,
    )


def counted_forward(path: str, ssm: DiagonalSsm, x: np.ndarray) -> tuple[np.ndarray, FlopCounter]:
    """Counting-mode output and counter for an explicit instance."""
    if path not in _COUNTED:
        raise ValueError(f"unknown path {path!r}, expected one of {PATHS}")
    counter = FlopCounter()
    result = _COUNTED[path](ssm, x, counter)
    return result, counter


@dataclass(frozen=True)
class ScalingResult:
    """Grid of count reports plus fitted log-log exponents per varied axis."""

    path: str
    reports: list[FlopReport]
    slopes: dict[str, float]

    def to_csv(self) -> str:
        header = "path,T,N,d,multiply_adds,additions,peak_live_elements"
        lines = [header]
        for rep in self.reports:
            lines.append(
                f"{rep.path},{rep.T},{rep.N},{rep.d},"
                f"{rep.multiply_adds},{rep.additions},{rep.peak_live_elements}"
            )
        return "\n".join(lines) + "\n"

    def summary_json(self) -> str:
        return json.dumps(
            {
                "path": self.path,
                "slopes": self.slopes,
                "points": [rep.as_dict(timing=False) for rep in self.reports],
            }
        )


def scaling_experiment(
    path: str,
    t_values: list[int],
    n_values: list[int],
    d_values: list[int],
    seed: int,
) -> ScalingResult:
    """Fit count-vs-size exponents along each varied axis.

    An axis is varied when it lists two or more distinct values; varied
    axes need at least three points for the fit. Unvaried axes are pinned
    to their first value while another axis sweeps.
    """
    axes = {"T": list(t_values), "N": list(n_values), "d": list(d_values)}
    varied = [name for name, vals in axes.items() if len(set(vals)) >= 2]
    for name in varied:
        if len(set(axes[name])) < 3:
            raise DegenerateGridError(
                f"axis {name} is varied but has fewer than 3 distinct points"
            )
    base = {name: vals[0] for name, vals in axes.items()}
    cache: dict[tuple[int, int, int], FlopReport] = {}

    def report_at(dims: dict[str, int]) -> FlopReport:
        key = (dims["T"], dims["N"], dims["d"])
        if key not in cache:
            cache[key] = count_flops(path, dims["T"], dims["N"], dims["d"], seed)
        return cache[key]

    slopes = {}
    for name in varied:
        counts = []
        for value in axes[name]:
            dims = dict(base)
            dims[name] = value
            counts.append(report_at(dims).multiply_adds)
        slope = np.polyfit(np.log(axes[name]), np.log(counts), 1)[0]
        slopes[name] = float(slope)
    if not cache:
        report_at(base)
    reports = sorted(cache.values(), key=lambda r: (r.T, r.N, r.d))
    return ScalingResult(path=path, reports=reports, slopes=slopes)


@dataclass(frozen=True)
class SpeedupReport:
    """Wall-clock comparison of the threaded linear path against sequential."""

    T: int
    N: int
    d: int
    workers: int
    wall_sequential_s: float
    wall_parallel_s: float
    speedup: float
    max_rel_deviation: float
    equivalent: bool

    def as_dict(self, timing: bool = True) -> dict:
        out = {
            "T": self.T,
            "N": self.N,
            "d": self.d,
            "workers": self.workers,
            "max_rel_deviation": self.max_rel_deviation,
            "equivalent": self.equivalent,
        }
        if timing:
            out["wall_sequential_s"] = self.wall_sequential_s
            out["wall_parallel_s"] = self.wall_parallel_s
            out["speedup"] = self.speedup
        return out


def _mode_channel_task(ssm: DiagonalSsm, x: np.ndarray, n: int, s: int) -> np.ndarray:
    z = ssm.b[:, n] * x[:, s]
    out = np.empty_like(z)
    out[0] = z[0]
    for t in range(1, z.shape[0]):
        out[t] = ssm.a_diag[t, n] * out[t - 1] + z[t]
    return ssm.c[:, n] * out


def parallel_speedup_probe(T: int, N: int, d: int, workers: int, seed: int) -> SpeedupReport:
    """Run the linear path with one worker per (mode, channel) task chunk.

    Only result equivalence carries a requirement (1e-12 against the
    sequential fixed-order reduction); the speedup is reported without a
    pass/fail threshold. CPython threading rarely helps these scans, which
    is part of what the probe documents.
    """
    if not 1 <= workers <= N * d:
        raise ValueError(f"workers must be in [1, N*d] = [1, {N * d}], got {workers}")
    ssm, x = random_instance(seed, T, N, d)
    start = time.perf_counter()
    y_seq = forward_ssd(ssm, x)
    wall_seq = time.perf_counter() - start

    start = time.perf_counter()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {
            (n, s): pool.submit(_mode_channel_task, ssm, x, n, s)
            for n in range(N)
            for s in range(d)
        }
        parts = {key: fut.result() for key, fut in futures.items()}
    y_par = np.zeros_like(x)
    for n in range(N):
        y_n = np.column_stack([parts[(n, s)] for s in range(d)])
        y_par = y_par + y_n
    wall_par = time.perf_counter() - start

    denom = max(float(np.linalg.norm(y_seq)), 1e-300)
    deviation = float(np.linalg.norm(y_par - y_seq) / denom)
    return SpeedupReport(
        T=T,
        N=N,
        d=d,
        workers=workers,
        wall_sequential_s=wall_seq,
        wall_parallel_s=wall_par,
        speedup=wall_seq / max(wall_par, 1e-12),
        max_rel_deviation=deviation,
        equivalent=deviation <= 1e-12,
    )
