"""Command line front end.

Subcommands:
  run          one closed-loop experiment from a config file
  sweep        repeat an experiment along one axis
  sigma-curve  analytic per-link energy fraction vs utilization
  flow-hist    flow-per-bucket histogram of a trace under a mask
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .energy import EnergyParams, sigma
from .flowkey import MaskSpec, export_histogram, flow_distribution
from .harness import (SWEEP_AXES, ExperimentConfig, ExperimentReport, emit_csv,
                      run_experiment, sweep)
from .linksim import EeeTimings
from .traffic import read_trace


def _summary(report: ExperimentReport) -> str:
    delay = ("%.3f" % (report.mean_delay_s * 1e6)) if report.mean_delay_s is not None else "n/a"
    return ("algorithm=%s energy=%.6f loss_pct=%.6f delay_us=%s lower_bound=%.6f "
            "intervals=%d" % (report.algorithm, report.energy_fraction,
                              report.loss_percent, delay, report.lower_bound,
                              len(report.intervals)))


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "algorithm", None) is not None:
        cfg = dataclasses.replace(cfg, algorithm=args.algorithm)
    return cfg


def _cmd_run(args) -> int:
    cfg = _load_config(args)
    report = run_experiment(cfg)
    print(_summary(report))
    if args.output:
        emit_csv(report, args.output)
        print(f"wrote {args.output}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise ValueError("--values must list at least one number")
    reports = sweep(cfg, args.axis, values)
    for v, report in zip(values, reports):
        print(f"{args.axis}={v:g} " + _summary(report))
    if args.output:
        emit_csv(reports, args.output, axis_values=values)
        print(f"wrote {args.output}")
    return 0


def _cmd_sigma_curve(args) -> int:
    timings = EeeTimings.for_capacity(args.capacity_bps, sigma_off=args.sigma_off)
    if args.t_sleep_s is not None or args.t_wake_s is not None:
        timings = EeeTimings(t_sleep_s=args.t_sleep_s or timings.t_sleep_s,
                             t_wake_s=args.t_wake_s or timings.t_wake_s,
                             sigma_off=args.sigma_off, capacity_bps=args.capacity_bps)
    params = timings.energy_params(args.mean_packet_bytes)
    if not 0 < args.step <= 1:
        raise ValueError(f"--step must be in (0, 1], got {args.step}")
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w", encoding="utf-8")
    try:
        out.write("utilization,energy_fraction\n")
        n = round(1.0 / args.step)
        for i in range(n + 1):
            rho = min(i * args.step, 1.0)
            out.write("%.9g,%.9g\n" % (rho, sigma(rho, params)))
    finally:
        if out is not sys.stdout:
            out.close()
            print(f"wrote {args.output}")
    return 0


def _cmd_flow_hist(args) -> int:
    spec = MaskSpec(field=args.field, offset_bits=args.offset_bits,
                    length_bits=args.length_bits,
                    combine_with_mac=args.combine_mac)
    hist = flow_distribution(read_trace(args.trace), spec)
    export_histogram(hist, spec.key_space, args.output)
    print(f"{hist.total_original_flows} source-destination pairs over "
          f"{len(hist.counts)} buckets; wrote {args.output}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bundlesim",
        description="Energy-aware flow assignment over Ethernet link bundles")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment from a config file")
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--algorithm", choices=("equitable", "greedy", "bounded_greedy",
                                           "conservative", "random"),
                   default=None, help="override the config algorithm")
    p.add_argument("--output", default=None, help="write per-interval CSV here")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="rerun an experiment along one axis")
    p.add_argument("--config", required=True)
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--values", required=True, help="comma-separated axis values")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--algorithm", choices=("equitable", "greedy", "bounded_greedy",
                                           "conservative", "random"), default=None)
    p.add_argument("--output", default=None, help="write one aggregate row per value")
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("sigma-curve", help="tabulate the analytic energy model")
    p.add_argument("--capacity-bps", type=float, default=10e9)
    p.add_argument("--mean-packet-bytes", type=float, default=1500.0)
    p.add_argument("--t-sleep-s", type=float, default=None)
    p.add_argument("--t-wake-s", type=float, default=None)
    p.add_argument("--sigma-off", type=float, default=0.1)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--output", default="-", help="CSV path, or - for stdout")
    p.set_defaults(func=_cmd_sigma_curve)

    p = sub.add_parser("flow-hist", help="bucket a trace's flows under a mask")
    p.add_argument("--trace", required=True)
    p.add_argument("--field", choices=("src_ip", "dst_ip"), default="dst_ip")
    p.add_argument("--offset-bits", type=int, default=0)
    p.add_argument("--length-bits", type=int, default=8)
    p.add_argument("--combine-mac", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_flow_hist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
