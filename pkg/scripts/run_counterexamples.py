#!/usr/bin/env python3
"""Print both impossibility demonstrations over a range of sizes."""

import argparse

from ssdlab.limits import softmax_counterexample, verify_non_dualizable


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-T", type=int, default=8)
    parser.add_argument("--width", type=int, default=2)
    args = parser.parse_args()

    print("softmax rank explosion")
    print(f"{'T':>3} {'rank(V)=1':>10} {'softmax rank':>13} {'logdet':>12} {'verdict':>8}")
    for size in range(2, min(args.max_T, 8) + 1):
        r = softmax_counterexample(size)
        m = r.measurements
        print(
            f"{size:>3} {str(m['rank_V_exact_one']):>10} {m['softmax_numeric_rank']:>13} "
            f"{m['logdet_analytic']:>12.4f} {str(r.verdict):>8}"
        )

    print(f"\ncorner kernel without a width-{args.width} attention dual")
    print(f"{'T':>3} {'applicable':>11} {'has dual':>9} {'new cols':>9} {'verdict':>8}")
    for size in range(3, args.max_T + 1):
        r = verify_non_dualizable(size, args.width)
        m = r.measurements
        print(
            f"{size:>3} {str(r.applicable):>11} {str(m['has_attention_dual']):>9} "
            f"{str(m['block_new_column_counts']):>9} {str(r.verdict):>8}"
        )


if __name__ == "__main__":
    main()
