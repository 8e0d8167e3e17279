#!/usr/bin/env python3
"""Sweep the estimation/assignment period for one algorithm."""

import argparse
import dataclasses
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from bundlesim.harness import ExperimentConfig, emit_csv, sweep

HERE = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG = os.path.join(HERE, "..", "configs", "reference.cfg")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=DEFAULT_CONFIG)
    ap.add_argument("--algorithm", default="conservative")
    ap.add_argument("--periods", default="0.1,0.25,0.5,1.0,2.0",
                    help="comma-separated sampling periods, seconds")
    ap.add_argument("--output", default="sampling_period_sweep.csv")
    args = ap.parse_args()

    cfg = dataclasses.replace(ExperimentConfig.from_file(args.config),
                              algorithm=args.algorithm)
    periods = [float(v) for v in args.periods.split(",")]
    reports = sweep(cfg, "sampling_period", periods)
    for period, report in zip(periods, reports):
        delay = f"{report.mean_delay_s * 1e6:.1f}us" if report.mean_delay_s else "n/a"
        print(f"period={period:g}s energy={report.energy_fraction:.5f} "
              f"loss={report.loss_percent:.4f}% delay={delay}")
    emit_csv(reports, args.output, axis_values=periods)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
