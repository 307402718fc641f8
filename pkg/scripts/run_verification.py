#!/usr/bin/env python3
"""Run the full verification suite and emit reports.

Usage:
    python scripts/run_verification.py [--out reports] [--seed 20260810]
"""

import argparse
import sys

from caustica.experiments import ALL_EXPERIMENTS, coverage, run_all
from caustica.report_io import emit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="reports")
    ap.add_argument("--seed", type=int, default=20260810)
    ap.add_argument("--only", nargs="*", choices=ALL_EXPERIMENTS, default=None)
    args = ap.parse_args()

    reports = run_all(seed=args.seed, out_dir=args.out, experiments=args.only)
    for exp_id, rep in reports.items():
        emit(rep, out_dir=args.out)
        status = "PASS" if rep.passed else "FAIL"
        print(f"{exp_id:5s} {status}  ({rep.wall_time_s:6.2f} s)  "
              + " ".join(f"{k}={'ok' if v else 'FAIL'}"
                         for k, v in sorted(rep.passes.items())))
    cov = coverage(reports)
    print("operation coverage:",
          "complete" if cov["complete"] else f"missing {cov['missing']}")
    ok = all(r.passed for r in reports.values())
    print("overall:", "PASS" if ok else "FAIL")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
