#!/usr/bin/env python3
"""Loss vs buffer size for each assignment algorithm."""

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
    ap.add_argument("--algorithms", default="equitable,greedy,bounded_greedy,conservative")
    ap.add_argument("--buffers", default="100,1000,10000")
    ap.add_argument("--outdir", default=".")
    args = ap.parse_args()

    base = ExperimentConfig.from_file(args.config)
    buffers = [int(v) for v in args.buffers.split(",")]
    for algo in args.algorithms.split(","):
        cfg = dataclasses.replace(base, algorithm=algo)
        reports = sweep(cfg, "buffer_size", buffers)
        losses = " ".join(f"{b}:{r.loss_percent:.4f}%" for b, r in zip(buffers, reports))
        print(f"{algo:<16} {losses}")
        path = os.path.join(args.outdir, f"buffer_sweep_{algo}.csv")
        emit_csv(reports, path, axis_values=buffers)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
