#!/usr/bin/env python3
"""Print per-epoch parameters and cumulative round counts.

    python scripts/round_table.py --n-max 12 [--epsilon 0.5]
"""

import argparse
import math

from adncount.params import EpsilonPolicy, total_rounds


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=10)
    ap.add_argument("--epsilon", default="auto")
    args = ap.parse_args()
    policy = EpsilonPolicy.parse(args.epsilon)

    print(f"{'k':>3} {'d':>4} {'p':>5} {'r':>10} {'tau':>12} {'epoch rounds':>14} {'total (n=k)':>16} {'/n^5 ln^2 n':>12}")
    for k in range(2, args.n_max + 1):
        prm = policy.params(k)
        total = total_rounds(k, policy)
        envelope = total / (k ** 5 * math.log(k) ** 2)
        print(f"{k:>3} {prm.d:>4} {prm.p:>5} {prm.r:>10} {str(prm.tau):>12} {prm.rounds:>14} {total:>16} {envelope:>12.2f}")


if __name__ == "__main__":
    main()
