#!/usr/bin/env python3
"""Reproduce the operation-count scaling study.

Sweeps the linear path along T, N and d and the materialized path along T,
prints the fitted log-log exponents, and optionally writes one CSV per
sweep into an output directory.
"""

import argparse
import pathlib

from ssdlab.bench import scaling_experiment


SWEEPS = [
    ("ssd", [64, 128, 256, 512, 1024], [4], [2]),
    ("ssd", [64], [1, 2, 4, 8, 16], [2]),
    ("ssd", [64], [4], [1, 2, 4, 8, 16]),
    ("materialized", [64, 128, 256, 512], [4], [2]),
    ("recurrence", [64, 128, 256, 512], [4], [2]),
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out-dir", default=None, help="directory for per-sweep CSV files")
    args = parser.parse_args()

    out_dir = pathlib.Path(args.out_dir) if args.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for idx, (path, t_vals, n_vals, d_vals) in enumerate(SWEEPS):
        result = scaling_experiment(path, t_vals, n_vals, d_vals, args.seed)
        axes = ", ".join(f"{axis}: {slope:.4f}" for axis, slope in result.slopes.items())
        print(f"{path:13s} T={t_vals} N={n_vals} d={d_vals} -> slopes {axes}")
        if out_dir:
            target = out_dir / f"sweep_{idx}_{path}.csv"
            target.write_text(result.to_csv())
            print(f"              wrote {target}")


if __name__ == "__main__":
    main()
