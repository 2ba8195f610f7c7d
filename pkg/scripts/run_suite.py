"""Run the acceptance battery and optionally write the results as JSON."""

import argparse
import json
import sys

from sdpfit.acceptance import run_all


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--criteria", help="comma-separated criterion numbers")
    ap.add_argument("--out", help="write results to this JSON file")
    args = ap.parse_args()
    only = [int(t) for t in args.criteria.split(",")] if args.criteria else None
    results = run_all(args.seed, only)
    for r in results:
        print(r.line())
    if args.out:
        with open(args.out, "w") as fh:
            json.dump([r.to_json() for r in results], fh, indent=2, default=str)
    return 0 if all(r.passed for r in results) else 2


if __name__ == "__main__":
    sys.exit(main())
