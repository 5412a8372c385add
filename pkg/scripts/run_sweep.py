#!/usr/bin/env python3
"""Sweep sizes and topologies, one CSV row per run, with invariant verdicts.

    python scripts/run_sweep.py --n-max 6 --seeds 3 --out sweep.csv

Sizes up to --exact-max use exact arithmetic, larger ones float64.
"""

import argparse
import csv
import sys
import time

from adncount.engine import RunConfig
from adncount.network import BUILTIN_KINDS, TopologySchedule
from adncount.numeric import Backend
from adncount.reporting import SWEEP_HEADER, sweep_row
from adncount.verify import check_run


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-max", type=int, default=4)
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--kinds", nargs="*", default=list(BUILTIN_KINDS), choices=BUILTIN_KINDS)
    ap.add_argument("--exact-max", type=int, default=4)
    ap.add_argument("--no-mixing", action="store_true", help="skip the mixing-bound check")
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_HEADER + ("seconds", "failed_checks"))
    all_ok = True
    for n in range(2, args.n_max + 1):
        backend = Backend("exact" if n <= args.exact_max else "float64")
        for kind in args.kinds:
            for seed in range(args.seeds):
                cfg = RunConfig(n=n, schedule=TopologySchedule(kind, n, seed=seed), backend=backend)
                t0 = time.perf_counter()
                outcome, checks = check_run(cfg, mixing=not args.no_mixing)
                failed = [c.name for c in checks if not c.passed]
                all_ok &= not failed
                w.writerow(sweep_row(outcome) + [f"{time.perf_counter() - t0:.2f}", ";".join(failed)])
                fh.flush()
    if fh is not sys.stdout:
        fh.close()
    return 0 if all_ok else 2


if __name__ == "__main__":
    sys.exit(main())
