#!/usr/bin/env python3
"""Run the epsilon convergence sweep and print the W1 table.

Usage: python3 scripts/run_convergence_sweep.py [--config CONFIG] [--out DIR]
"""

import argparse
import json
import sys

from levelcg.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=None)
    ap.add_argument("--out", default="out/converge")
    ap.add_argument("--threads", default=None)
    args = ap.parse_args()
    argv = ["converge", "--out", args.out]
    if args.config:
        argv += ["--config", args.config]
    if args.threads:
        argv += ["--threads", args.threads]
    rc = cli_main(argv)
    if rc != 0:
        return rc
    with open(f"{args.out}/converge.json") as fh:
        doc = json.load(fh)
    print(f"{'epsilon':>8} {'sup W1':>10} {'terminal W1':>12} "
          f"{'left mass':>10} {'right mass':>10}")
    for row in doc["rows"]:
        print(f"{row['epsilon']:>8g} {row['sup_w1']:>10.4f} "
              f"{row['terminal_w1']:>12.4f} {row['left_mass']:>10.4f} "
              f"{row['right_mass']:>10.4f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
