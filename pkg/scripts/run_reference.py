#!/usr/bin/env python3
"""Run every assignment algorithm on the reference workload and tabulate."""

import argparse
import dataclasses
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bundlesim.harness import ALGORITHMS, ExperimentConfig, emit_csv, run_experiment

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG = os.path.join(HERE, "..", "configs", "reference.cfg")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=DEFAULT_CONFIG)
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--outdir", default=None, help="write per-algorithm interval CSVs here")
    args = ap.parse_args()

    base = ExperimentConfig.from_file(args.config)
    if args.seed is not None:
        base = dataclasses.replace(base, seed=args.seed)

    print(f"{'algorithm':<16} {'energy':>8} {'lower':>8} {'loss%':>8} {'delay_us':>10}")
    for algo in ALGORITHMS:
        report = run_experiment(dataclasses.replace(base, algorithm=algo))
        delay = f"{report.mean_delay_s * 1e6:10.1f}" if report.mean_delay_s else f"{'n/a':>10}"
        print(f"{algo:<16} {report.energy_fraction:8.5f} {report.lower_bound:8.5f} "
              f"{report.loss_percent:8.4f} {delay}")
        if args.outdir:
            os.makedirs(args.outdir, exist_ok=True)
            emit_csv(report, os.path.join(args.outdir, f"{algo}.csv"))


if __name__ == "__main__":
    main()
