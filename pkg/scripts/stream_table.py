#!/usr/bin/env python3
"""Run the task-stream comparison (ER / ER+AT / ER+EAT) under the PGD and
FGSM training attacks and print final accuracy/robustness per strategy.

Usage: python scripts/stream_table.py [--out DIR] [--seeds N N ...]
                                      [--configs NAME ...]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from eatcl.runner import (format_summary_table, parse_config, run_experiment,
                          summarize_results)  # noqa: E402

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/stream")
    ap.add_argument("--seeds", type=int, nargs="+", default=None)
    ap.add_argument("--configs", nargs="+",
                    default=["stream_pgd.conf", "stream_fgsm.conf"])
    args = ap.parse_args()

    for fname in args.configs:
        with open(os.path.join(CONFIG_DIR, fname)) as fh:
            cfg = parse_config(fh.read())
        out_dir = os.path.join(args.out, cfg["experiment"])
        results = run_experiment(cfg, out_dir, quiet=True, seeds=args.seeds)
        print(format_summary_table(summarize_results(cfg, results)))
        print()
    return 0


if __name__ == "__main__":
    sys.exit(main())
