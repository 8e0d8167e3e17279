"""Closed-loop experiments: sample demands, reassign flows, simulate, report.

The controller wakes at every sampling boundary, differences the byte
counters into per-flow demands, runs the configured assignment policy, and
installs the result for the next interval.  The first interval always runs
on reactive random placement because no demands exist yet; by default it is
excluded from the aggregate metrics as a warm-up transient.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from .energy import EnergyParams, bundle_lower_bound
from .estimation import FlowCounters
from .flowkey import FlowKeyRegistry, MaskSpec, flow_key_raw
from .linksim import BundleSim, EeeTimings
from .scheduling import (Assignment, BundleConfig, assign_bounded_greedy,
                         assign_conservative, assign_equitable, assign_greedy)
from .traffic import (PacketArrays, SyntheticProfile, generate_synthetic_arrays,
                      read_trace, scale_trace)

ALGORITHMS = ("equitable", "greedy", "bounded_greedy", "conservative", "random")

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_sizes(text: str) -> Union[int, tuple]:
    """'1500' or a mixture '64:0.4,1500:0.6'."""
    text = text.strip()
    if ":" not in text:
        return int(text)
    entries = []
    for part in text.split(","):
        size, weight = part.split(":")
        entries.append((int(size), float(weight)))
    return tuple(entries)


@dataclass
class ExperimentConfig:
    """One experiment; field names double as config file keys."""

    # workload: a trace file, or the synthetic profile when trace_file is unset
    trace_file: Optional[str] = None
    scale_factor: float = 1.0
    synth_flows: int = 3000
    synth_rate_bps: float = 3.25e9
    synth_packet_bytes: Union[int, tuple, str] = 1500
    synth_zipf_exponent: float = 1.0
    # flow aggregation mask
    mask_field: str = "dst_ip"
    mask_offset_bits: int = 0
    mask_length_bits: int = 8
    mask_combine_mac: bool = True
    # bundle; transition times default to the standard scaled to capacity
    n_ports: int = 5
    port_capacity_bps: float = 1e9
    t_sleep_s: Optional[float] = None
    t_wake_s: Optional[float] = None
    sigma_off: float = 0.1
    # controller
    algorithm: str = "conservative"
    bound_bps: Optional[float] = None  # bounded_greedy headroom; default 20% of a port
    margin: float = 0.2                # conservative safety margin
    sampling_period_s: float = 0.5
    # simulation
    buffer_pkts: int = 10000
    duration_s: float = 60.0
    seed: int = 1
    exclude_first_interval: bool = True

    def __post_init__(self):
        if self.t_sleep_s is None or self.t_wake_s is None:
            scaled = EeeTimings.for_capacity(self.port_capacity_bps)
            if self.t_sleep_s is None:
                self.t_sleep_s = scaled.t_sleep_s
            if self.t_wake_s is None:
                self.t_wake_s = scaled.t_wake_s
        if self.bound_bps is None:
            self.bound_bps = 0.2 * self.port_capacity_bps
        if isinstance(self.synth_packet_bytes, str):
            self.synth_packet_bytes = _parse_sizes(self.synth_packet_bytes)

    def validate(self) -> None:
        self.mask_spec()
        self.timings()
        BundleConfig(self.n_ports, self.port_capacity_bps)
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if not self.sampling_period_s > 0:
            raise ValueError(f"sampling_period_s must be positive, got {self.sampling_period_s}")
        if not self.duration_s > 0:
            raise ValueError(f"duration_s must be positive, got {self.duration_s}")
        if self.exclude_first_interval and self.duration_s < 2 * self.sampling_period_s:
            raise ValueError(
                "duration_s must cover at least two sampling periods when the "
                "first interval is excluded from aggregates")
        if self.buffer_pkts < 1:
            raise ValueError(f"buffer_pkts must be >= 1, got {self.buffer_pkts}")
        if not (0 <= self.bound_bps <= self.port_capacity_bps):
            raise ValueError(f"bound_bps must be in [0, port capacity], got {self.bound_bps}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if not self.scale_factor > 0:
            raise ValueError(f"scale_factor must be positive, got {self.scale_factor}")
        if self.trace_file is None:
            SyntheticProfile(n_flows=self.synth_flows, mean_rate_bps=self.synth_rate_bps,
                             packet_size_dist=self.synth_packet_bytes,
                             zipf_exponent=self.synth_zipf_exponent,
                             duration_s=self.duration_s, seed=self.seed)

    def mask_spec(self) -> MaskSpec:
        return MaskSpec(field=self.mask_field, offset_bits=self.mask_offset_bits,
                        length_bits=self.mask_length_bits,
                        combine_with_mac=self.mask_combine_mac)

    def timings(self) -> EeeTimings:
        return EeeTimings(t_sleep_s=self.t_sleep_s, t_wake_s=self.t_wake_s,
                          sigma_off=self.sigma_off, capacity_bps=self.port_capacity_bps)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        """Parse a flat ``key = value`` file with # comments."""
        parsers = _field_parsers()
        values: Dict[str, object] = {}
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
                key, _, raw = line.partition("=")
                key = key.strip()
                raw = raw.strip()
                if key not in parsers:
                    known = ", ".join(sorted(parsers))
                    raise ValueError(f"{path}: line {lineno}: unknown key {key!r} (known: {known})")
                try:
                    values[key] = parsers[key](raw)
                except ValueError as exc:
                    raise ValueError(f"{path}: line {lineno}: {key}: {exc}") from None
        return cls(**values)


def _field_parsers():
    out = {}
    for f in dataclasses.fields(ExperimentConfig):
        if f.name in ("trace_file", "mask_field", "algorithm"):
            out[f.name] = str
        elif f.name == "synth_packet_bytes":
            out[f.name] = _parse_sizes
        elif f.name in ("mask_combine_mac", "exclude_first_interval"):
            out[f.name] = _parse_bool
        elif f.name in ("synth_flows", "mask_offset_bits", "mask_length_bits",
                        "n_ports", "buffer_pkts", "seed"):
            out[f.name] = lambda s: int(float(s))
        else:
            out[f.name] = float
    return out


@dataclass
class IntervalRecord:
    index: int
    start_s: float
    end_s: float
    per_port_energy: List[float]
    energy_fraction: float
    offered: int
    dropped: int
    departed: int
    bytes_offered: int
    bytes_sent: int
    delay_sum_s: float
    mean_delay_s: Optional[float]


@dataclass
class ExperimentReport:
    algorithm: str
    sampling_period_s: float
    buffer_pkts: int
    duration_s: float
    seed: int
    intervals: List[IntervalRecord]
    included: List[int]
    energy_fraction: float
    loss_percent: float
    mean_delay_s: Optional[float]
    lower_bound: float
    mean_offered_bps: float
    mean_packet_bytes: Optional[float]


def _load_workload(cfg: ExperimentConfig) -> PacketArrays:
    if cfg.trace_file is not None:
        packets = read_trace(cfg.trace_file)
        if cfg.scale_factor != 1.0:
            packets = scale_trace(packets, cfg.scale_factor)
        arrays = PacketArrays.from_packets(packets)
    else:
        # under a scale factor the profile is generated long and compressed,
        # so the scaled stream still spans duration_s
        profile = SyntheticProfile(
            n_flows=cfg.synth_flows, mean_rate_bps=cfg.synth_rate_bps,
            packet_size_dist=cfg.synth_packet_bytes,
            zipf_exponent=cfg.synth_zipf_exponent,
            duration_s=cfg.duration_s * cfg.scale_factor, seed=cfg.seed)
        arrays = generate_synthetic_arrays(profile)
        if cfg.scale_factor != 1.0:
            arrays.ts = arrays.ts / cfg.scale_factor
    cut = int(np.searchsorted(arrays.ts, cfg.duration_s, side="left"))
    if cut < len(arrays):
        arrays = PacketArrays(arrays.ts[:cut], arrays.src_ip[:cut], arrays.dst_ip[:cut],
                              arrays.dst_mac[:cut], arrays.size[:cut])
    return arrays


def _interval_edges(cfg: ExperimentConfig) -> List[float]:
    edges = [0.0]
    k = 1
    while True:
        t = k * cfg.sampling_period_s
        if t >= cfg.duration_s - 1e-9 * cfg.sampling_period_s:
            break
        edges.append(t)
        k += 1
    edges.append(cfg.duration_s)
    return edges


def _scheduler(cfg: ExperimentConfig, bundle: BundleConfig):
    if cfg.algorithm == "equitable":
        return lambda demands: assign_equitable(demands, bundle)
    if cfg.algorithm == "greedy":
        return lambda demands: assign_greedy(demands, bundle)
    if cfg.algorithm == "bounded_greedy":
        return lambda demands: assign_bounded_greedy(demands, bundle, cfg.bound_bps)
    if cfg.algorithm == "conservative":
        return lambda demands: assign_conservative(demands, bundle, cfg.margin)
    if cfg.algorithm == "random":
        return None  # reactive placement only, never reassigned
    raise ValueError(f"unknown algorithm {cfg.algorithm!r}")


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one closed-loop experiment and aggregate its interval metrics."""
    cfg.validate()
    arrays = _load_workload(cfg)
    mask = cfg.mask_spec()
    raw_keys, mac_table = flow_key_raw(arrays, mask)

    registry = FlowKeyRegistry(mask)
    counters = FlowCounters(registry)
    bundle = BundleConfig(cfg.n_ports, cfg.port_capacity_bps)
    sim = BundleSim(bundle, cfg.timings(), cfg.buffer_pkts,
                    seed=cfg.seed * 1000003 + 13, registry=registry)
    schedule = _scheduler(cfg, bundle)

    edges = _interval_edges(cfg)
    bounds = np.searchsorted(arrays.ts, edges, side="left").astype(np.int64)
    intervals: List[IntervalRecord] = []
    for k in range(len(edges) - 1):
        t0, t1 = edges[k], edges[k + 1]
        i0, i1 = int(bounds[k]), int(bounds[k + 1])
        if i1 > i0:
            ids = registry.intern_raw(raw_keys[i0:i1], mac_table)
            counters.record_batch(ids, arrays.size[i0:i1], arrays.ts[i0:i1])
            sim.offer_batch(arrays.ts[i0:i1], arrays.size[i0:i1], ids)
        sim.run_until(t1)
        if k + 2 < len(edges) and schedule is not None:
            demands = counters.estimate_rates(t0, t1)
            sim.apply_assignment(schedule(demands), t1)

    for k in range(len(edges) - 1):
        t0, t1 = edges[k], edges[k + 1]
        per_port = sim.interval_metrics(t0, t1)
        departed = sum(m["departed"] for m in per_port)
        delay_sum = sum(m["delay_sum_s"] for m in per_port)
        intervals.append(IntervalRecord(
            index=k, start_s=t0, end_s=t1,
            per_port_energy=[m["energy_fraction"] for m in per_port],
            energy_fraction=sum(m["energy_fraction"] for m in per_port) / len(per_port),
            offered=sum(m["offered"] for m in per_port),
            dropped=sum(m["dropped"] for m in per_port),
            departed=departed,
            bytes_offered=sum(m["bytes_offered"] for m in per_port),
            bytes_sent=sum(m["bytes_sent"] for m in per_port),
            delay_sum_s=delay_sum,
            mean_delay_s=delay_sum / departed if departed else None,
        ))

    included = list(range(len(intervals)))
    if cfg.exclude_first_interval and len(intervals) > 1:
        included = included[1:]
    rows = [intervals[i] for i in included]
    span = sum(r.end_s - r.start_s for r in rows)
    offered = sum(r.offered for r in rows)
    dropped = sum(r.dropped for r in rows)
    departed = sum(r.departed for r in rows)
    delay_sum = sum(r.delay_sum_s for r in rows)
    bytes_offered = sum(r.bytes_offered for r in rows)

    energy = sum(r.energy_fraction * (r.end_s - r.start_s) for r in rows) / span
    mean_rate = bytes_offered * 8.0 / span
    mean_pkt = bytes_offered / offered if offered else None
    params = EnergyParams(mu=cfg.port_capacity_bps / (8.0 * (mean_pkt or 1500.0)),
                          t_sleep=cfg.t_sleep_s, t_wake=cfg.t_wake_s,
                          sigma_off=cfg.sigma_off)
    lower = bundle_lower_bound(min(mean_rate, bundle.total_capacity_bps), bundle, params)

    return ExperimentReport(
        algorithm=cfg.algorithm,
        sampling_period_s=cfg.sampling_period_s,
        buffer_pkts=cfg.buffer_pkts,
        duration_s=cfg.duration_s,
        seed=cfg.seed,
        intervals=intervals,
        included=included,
        energy_fraction=energy,
        loss_percent=100.0 * dropped / offered if offered else 0.0,
        mean_delay_s=delay_sum / departed if departed else None,
        lower_bound=lower,
        mean_offered_bps=mean_rate,
        mean_packet_bytes=mean_pkt,
    )


SWEEP_AXES = {
    "sampling_period": "sampling_period_s",
    "buffer_size": "buffer_pkts",
    "margin": "margin",
}


def sweep(cfg: ExperimentConfig, axis: str, values: Sequence[float]) -> List[ExperimentReport]:
    """Run the config once per value of the axis, in the given order."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; valid: {sorted(SWEEP_AXES)}")
    field_name = SWEEP_AXES[axis]
    out = []
    for v in values:
        value = int(v) if field_name == "buffer_pkts" else float(v)
        out.append(run_experiment(dataclasses.replace(cfg, **{field_name: value})))
    return out


CSV_HEADER = "axis_value,algorithm,sampling_period_s,buffer_pkts,energy_fraction,loss_percent,mean_delay_us,lower_bound"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "%.9g" % v
    return str(v)


def _aggregate_row(axis_value, report: ExperimentReport) -> str:
    delay_us = None if report.mean_delay_s is None else report.mean_delay_s * 1e6
    cells = [axis_value, report.algorithm, report.sampling_period_s, report.buffer_pkts,
             report.energy_fraction, report.loss_percent, delay_us, report.lower_bound]
    return ",".join(_fmt(c) for c in cells)


def emit_csv(reports, path, axis_values: Optional[Sequence] = None) -> None:
    """Write the report CSV.

    For a single report, one row per interval (axis_value is the interval
    index) plus a final ``aggregate`` row.  For a list of reports from a
    sweep, one aggregate row per report keyed by its axis value.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        if isinstance(reports, ExperimentReport):
            report = reports
            for r in report.intervals:
                delay_us = None if r.mean_delay_s is None else r.mean_delay_s * 1e6
                offered = r.offered
                cells = [r.index, report.algorithm, report.sampling_period_s,
                         report.buffer_pkts, r.energy_fraction,
                         100.0 * r.dropped / offered if offered else 0.0,
                         delay_us, report.lower_bound]
                fh.write(",".join(_fmt(c) for c in cells) + "\n")
            fh.write(_aggregate_row("aggregate", report) + "\n")
        else:
            reports = list(reports)
            if axis_values is None or len(axis_values) != len(reports):
                raise ValueError("sweep CSV needs one axis value per report")
            for v, report in zip(axis_values, reports):
                fh.write(_aggregate_row(v, report) + "\n")
