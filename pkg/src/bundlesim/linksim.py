"""Event-driven simulation of a bundle of EEE links in frame-transmission mode.

Each link runs the four-state machine ACTIVE / GOING_TO_SLEEP / LPI / WAKING
over a finite drop-tail FIFO.  Transitions:

    ACTIVE -> GOING_TO_SLEEP   queue drained (last departure)
    GOING_TO_SLEEP -> LPI      sleep elapsed, queue still empty
    GOING_TO_SLEEP -> WAKING   sleep elapsed, packets arrived meanwhile
    LPI -> WAKING              arrival
    WAKING -> ACTIVE           wake elapsed, head-of-line service starts

The sleep transition is never aborted and both transitions burn full power.
Links do not interact, so each one carries at most a single pending internal
event (departure, sleep end, or wake end) and is advanced lazily; ties at
one instant resolve departures before arrivals.  The numeric core is a flat
function that numba compiles when available and that runs as plain Python
otherwise.
"""

from __future__ import annotations

import random
from bisect import insort
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .energy import (STD_CAPACITY_BPS, STD_SIGMA_OFF, STD_T_SLEEP_S,
                     STD_T_WAKE_S, EnergyParams, measured_consumption)
from .flowkey import FlowKey, FlowKeyRegistry, MaskSpec
from .scheduling import Assignment, BundleConfig, assign_random

ACTIVE, GOING_TO_SLEEP, LPI, WAKING = 0, 1, 2, 3
MODE_NAMES = ("ACTIVE", "GOING_TO_SLEEP", "LPI", "WAKING")

# state vector layout
_SF_CLOCK, _SF_NEXT_EVENT = 0, 1
_SI_MODE, _SI_HEAD, _SI_COUNT = 0, 1, 2
# float accumulators: per-mode seconds (indices match mode codes), delay sum
_AF_DELAY = 4
# int accumulators
_AI_OFFERED, _AI_DROPPED, _AI_DEPARTED, _AI_BYTES_SENT, _AI_BYTES_OFFERED = range(5)

# trace event codes
_K_DEPART, _K_SLEEP, _K_LPI, _K_WAKE, _K_ACTIVE, _K_ARRIVE, _K_DROP = range(7)
EVENT_NAMES = ("depart", "sleep", "lpi", "wake", "active", "arrive", "drop")


def _advance_py(arr_t, arr_sz, horizon, st_f, st_i, q_t, q_sz, acc_f, acc_i,
                byte_time, t_sleep, t_wake, buffer_size, accepted,
                trace_on, tr_t, tr_i):
    """Feed one link its arrivals in order, then advance it to horizon.

    Everything mutable lives in the passed arrays so the same code runs
    compiled or interpreted.  Returns the number of trace rows written.
    """
    clock = st_f[_SF_CLOCK]
    next_ev = st_f[_SF_NEXT_EVENT]
    mode = st_i[_SI_MODE]
    head = st_i[_SI_HEAD]
    count = st_i[_SI_COUNT]
    cap = q_t.shape[0]
    n = arr_t.shape[0]
    rows = 0
    for j in range(n + 1):
        t = arr_t[j] if j < n else horizon
        # internal events up to and including t fire before the arrival at t
        while next_ev <= t:
            acc_f[mode] += next_ev - clock
            clock = next_ev
            if mode == ACTIVE:
                enq_t = q_t[head]
                sz = q_sz[head]
                head += 1
                if head == cap:
                    head = 0
                count -= 1
                acc_i[_AI_DEPARTED] += 1
                acc_i[_AI_BYTES_SENT] += sz
                acc_f[_AF_DELAY] += clock - enq_t
                if trace_on:
                    tr_t[rows] = clock
                    tr_i[rows, 0] = _K_DEPART
                    tr_i[rows, 1] = count
                    tr_i[rows, 2] = ACTIVE
                    tr_i[rows, 3] = 0
                    rows += 1
                if count > 0:
                    next_ev = clock + q_sz[head] * byte_time
                else:
                    mode = GOING_TO_SLEEP
                    next_ev = clock + t_sleep
                    if trace_on:
                        tr_t[rows] = clock
                        tr_i[rows, 0] = _K_SLEEP
                        tr_i[rows, 1] = count
                        tr_i[rows, 2] = GOING_TO_SLEEP
                        tr_i[rows, 3] = 0
                        rows += 1
            elif mode == GOING_TO_SLEEP:
                if count == 0:
                    mode = LPI
                    next_ev = np.inf
                    if trace_on:
                        tr_t[rows] = clock
                        tr_i[rows, 0] = _K_LPI
                        tr_i[rows, 1] = count
                        tr_i[rows, 2] = LPI
                        tr_i[rows, 3] = 0
                        rows += 1
                else:
                    mode = WAKING
                    next_ev = clock + t_wake
                    if trace_on:
                        tr_t[rows] = clock
                        tr_i[rows, 0] = _K_WAKE
                        tr_i[rows, 1] = count
                        tr_i[rows, 2] = WAKING
                        tr_i[rows, 3] = 0
                        rows += 1
            else:  # WAKING elapsed; head-of-line service starts now
                mode = ACTIVE
                next_ev = clock + q_sz[head] * byte_time
                if trace_on:
                    tr_t[rows] = clock
                    tr_i[rows, 0] = _K_ACTIVE
                    tr_i[rows, 1] = count
                    tr_i[rows, 2] = ACTIVE
                    tr_i[rows, 3] = 0
                    rows += 1
        acc_f[mode] += t - clock
        clock = t
        if j == n:
            break
        sz = arr_sz[j]
        acc_i[_AI_OFFERED] += 1
        acc_i[_AI_BYTES_OFFERED] += sz
        if count >= buffer_size:
            acc_i[_AI_DROPPED] += 1
            accepted[j] = False
            if trace_on:
                tr_t[rows] = t
                tr_i[rows, 0] = _K_DROP
                tr_i[rows, 1] = count
                tr_i[rows, 2] = mode
                tr_i[rows, 3] = 1
                rows += 1
            continue
        tail = head + count
        if tail >= cap:
            tail -= cap
        q_t[tail] = t
        q_sz[tail] = sz
        count += 1
        accepted[j] = True
        if trace_on:
            tr_t[rows] = t
            tr_i[rows, 0] = _K_ARRIVE
            tr_i[rows, 1] = count
            tr_i[rows, 2] = mode
            tr_i[rows, 3] = 1
            rows += 1
        if mode == LPI:
            mode = WAKING
            next_ev = t + t_wake
            if trace_on:
                tr_t[rows] = t
                tr_i[rows, 0] = _K_WAKE
                tr_i[rows, 1] = count
                tr_i[rows, 2] = WAKING
                tr_i[rows, 3] = 1
                rows += 1
    st_f[_SF_CLOCK] = clock
    st_f[_SF_NEXT_EVENT] = next_ev
    st_i[_SI_MODE] = mode
    st_i[_SI_HEAD] = head
    st_i[_SI_COUNT] = count
    return rows


try:
    import numba
    _advance = numba.njit(cache=True)(_advance_py)
except ImportError:  # same loop, interpreted
    _advance = _advance_py

_EMPTY_T = np.empty(0, dtype=np.float64)
_EMPTY_SZ = np.empty(0, dtype=np.int32)
_EMPTY_ACCEPT = np.empty(0, dtype=np.bool_)
_EMPTY_TRI = np.empty((0, 4), dtype=np.int64)


@dataclass(frozen=True)
class EeeTimings:
    """Per-link EEE parameters; transition times in seconds."""

    t_sleep_s: float = STD_T_SLEEP_S
    t_wake_s: float = STD_T_WAKE_S
    sigma_off: float = STD_SIGMA_OFF
    capacity_bps: float = STD_CAPACITY_BPS

    def __post_init__(self):
        if self.t_sleep_s < 0 or self.t_wake_s < 0:
            raise ValueError("transition times must be >= 0")
        if not 0 <= self.sigma_off <= 1:
            raise ValueError(f"sigma_off must be in [0, 1], got {self.sigma_off}")
        if not self.capacity_bps > 0:
            raise ValueError(f"capacity_bps must be positive, got {self.capacity_bps}")

    @classmethod
    def for_capacity(cls, capacity_bps: float, sigma_off: float = STD_SIGMA_OFF) -> "EeeTimings":
        """Standard timings scaled inversely with capacity.

        Keeps the transition-to-service-time ratio of the 10 Gb/s standard,
        so the consumption curve at a given load is capacity-invariant.
        """
        scale = STD_CAPACITY_BPS / capacity_bps
        return cls(t_sleep_s=STD_T_SLEEP_S * scale, t_wake_s=STD_T_WAKE_S * scale,
                   sigma_off=sigma_off, capacity_bps=capacity_bps)

    def energy_params(self, mean_packet_bytes: float = 1500.0) -> EnergyParams:
        return EnergyParams(mu=self.capacity_bps / (8.0 * mean_packet_bytes),
                            t_sleep=self.t_sleep_s, t_wake=self.t_wake_s,
                            sigma_off=self.sigma_off)


class LinkState:
    """One EEE link: state machine, drop-tail FIFO, cumulative accumulators."""

    def __init__(self, timings: EeeTimings, buffer_size: int, trace: bool = False):
        if buffer_size < 1:
            raise ValueError(f"buffer_size must be >= 1, got {buffer_size}")
        self.timings = timings
        self.buffer_size = buffer_size
        self.trace_enabled = trace
        self._byte_time = 8.0 / timings.capacity_bps
        self._st_f = np.array([0.0, np.inf], dtype=np.float64)
        self._st_i = np.array([LPI, 0, 0], dtype=np.int64)
        self._q_t = np.zeros(buffer_size, dtype=np.float64)
        self._q_sz = np.zeros(buffer_size, dtype=np.int32)
        # mode seconds (codes 0..3) then delay sum
        self._acc_f = np.zeros(5, dtype=np.float64)
        self._acc_i = np.zeros(5, dtype=np.int64)
        self._trace_chunks: List[tuple] = []

    @property
    def clock(self) -> float:
        return float(self._st_f[_SF_CLOCK])

    @property
    def mode(self) -> str:
        return MODE_NAMES[int(self._st_i[_SI_MODE])]

    @property
    def queue_len(self) -> int:
        return int(self._st_i[_SI_COUNT])

    def _run(self, arr_t, arr_sz, horizon, accepted):
        if self.trace_enabled:
            cap = 8 * (len(arr_t) + self.queue_len) + 32
            tr_t = np.empty(cap, dtype=np.float64)
            tr_i = np.empty((cap, 4), dtype=np.int64)
            rows = _advance(arr_t, arr_sz, horizon, self._st_f, self._st_i,
                            self._q_t, self._q_sz, self._acc_f, self._acc_i,
                            self._byte_time, self.timings.t_sleep_s,
                            self.timings.t_wake_s, self.buffer_size, accepted,
                            True, tr_t, tr_i)
            if rows:
                self._trace_chunks.append((tr_t[:rows].copy(), tr_i[:rows].copy()))
        else:
            _advance(arr_t, arr_sz, horizon, self._st_f, self._st_i,
                     self._q_t, self._q_sz, self._acc_f, self._acc_i,
                     self._byte_time, self.timings.t_sleep_s,
                     self.timings.t_wake_s, self.buffer_size, accepted,
                     False, _EMPTY_T, _EMPTY_TRI)

    def offer(self, t: float, size: int) -> bool:
        """Present one packet; returns False when the buffer is full."""
        if t < self.clock:
            raise ValueError(f"arrival at {t} is before link time {self.clock}")
        if size <= 0:
            raise ValueError(f"size must be positive, got {size}")
        arr_t = np.array([t], dtype=np.float64)
        arr_sz = np.array([size], dtype=np.int32)
        accepted = np.empty(1, dtype=np.bool_)
        self._run(arr_t, arr_sz, t, accepted)
        return bool(accepted[0])

    def offer_many(self, ts: np.ndarray, sizes: np.ndarray) -> np.ndarray:
        """Present a sorted batch of packets; returns per-packet acceptance."""
        if len(ts) == 0:
            return _EMPTY_ACCEPT
        if ts[0] < self.clock:
            raise ValueError(f"arrival at {ts[0]} is before link time {self.clock}")
        ts = np.ascontiguousarray(ts, dtype=np.float64)
        sizes = np.ascontiguousarray(sizes, dtype=np.int32)
        accepted = np.empty(len(ts), dtype=np.bool_)
        self._run(ts, sizes, float(ts[-1]), accepted)
        return accepted

    def advance_to(self, t: float) -> None:
        """Process internal events up to t and move the link clock there."""
        if t < self.clock:
            raise ValueError(f"cannot advance backwards to {t} from {self.clock}")
        self._run(_EMPTY_T, _EMPTY_SZ, float(t), _EMPTY_ACCEPT)

    def mode_seconds(self) -> Dict[str, float]:
        return {name: float(self._acc_f[i]) for i, name in enumerate(MODE_NAMES)}

    def counters(self) -> Dict[str, int]:
        return {
            "offered": int(self._acc_i[_AI_OFFERED]),
            "dropped": int(self._acc_i[_AI_DROPPED]),
            "departed": int(self._acc_i[_AI_DEPARTED]),
            "bytes_sent": int(self._acc_i[_AI_BYTES_SENT]),
            "bytes_offered": int(self._acc_i[_AI_BYTES_OFFERED]),
        }

    @property
    def delay_sum_s(self) -> float:
        return float(self._acc_f[_AF_DELAY])

    def trace_rows(self) -> List[tuple]:
        """(time, event, queue_len, mode, arrival_driven) in processing order."""
        out = []
        for tr_t, tr_i in self._trace_chunks:
            for r in range(len(tr_t)):
                out.append((float(tr_t[r]), EVENT_NAMES[int(tr_i[r, 0])],
                            int(tr_i[r, 1]), MODE_NAMES[int(tr_i[r, 2])],
                            int(tr_i[r, 3])))
        return out


class BundleSim:
    """A bundle of identical EEE links fed by keyed packets.

    Routing is a table FlowKey -> port, replaced wholesale by
    apply_assignment.  A key with no entry gets a uniform random port on
    first sight and keeps it until the next assignment, mirroring a reactive
    controller installing a rule for an unknown flow.
    """

    def __init__(self, bundle: BundleConfig, timings: Optional[EeeTimings] = None,
                 buffer_size: int = 10000, seed: int = 0,
                 registry: Optional[FlowKeyRegistry] = None, trace: bool = False):
        if timings is None:
            timings = EeeTimings.for_capacity(bundle.port_capacity_bps)
        if timings.capacity_bps != bundle.port_capacity_bps:
            raise ValueError("timings capacity differs from bundle port capacity")
        self.bundle = bundle
        self.timings = timings
        self.buffer_size = buffer_size
        self.registry = registry if registry is not None else FlowKeyRegistry(MaskSpec())
        self.links = [LinkState(timings, buffer_size, trace=trace) for _ in range(bundle.n_ports)]
        self.now = 0.0
        self._rng = random.Random(seed)
        self._route = np.full(max(len(self.registry), 64), -1, dtype=np.int64)
        self._pending: List[tuple] = []  # (at, {fid: port}) sorted by at
        self._marks: Dict[float, list] = {}
        self._mark(0.0)

    # -- routing ------------------------------------------------------------

    def _ensure_route(self, n: int) -> None:
        if n <= len(self._route):
            return
        grown = np.full(max(n, 2 * len(self._route)), -1, dtype=np.int64)
        grown[: len(self._route)] = self._route
        self._route = grown

    def _install(self, table: Dict[int, int]) -> None:
        self._route[:] = -1
        if table:
            self._ensure_route(max(table) + 1)
            for fid, port in table.items():
                self._route[fid] = port

    def _flush_pending(self, upto: float) -> None:
        while self._pending and self._pending[0][0] <= upto:
            _, table = self._pending.pop(0)
            self._install(table)

    def apply_assignment(self, assignment: Assignment, at: float) -> None:
        """Route packets arriving at or after ``at`` per the new assignment."""
        if at < self.now:
            raise ValueError(f"cannot apply an assignment at {at}, now is {self.now}")
        table: Dict[int, int] = {}
        for key, port in assignment.flow_to_port.items():
            if not 0 <= port < self.bundle.n_ports:
                raise ValueError(f"port {port} out of range for {key}")
            table[self.registry.intern(key)] = port
        if at <= self.now:
            self._install(table)
        else:
            self._pending = [(a, tb) for a, tb in self._pending if a != at]
            insort(self._pending, (at, table), key=lambda item: item[0])

    def _resolve_ports(self, ids: np.ndarray) -> np.ndarray:
        self._ensure_route(int(ids.max()) + 1 if len(ids) else 0)
        ports = self._route[ids]
        unknown = ports < 0
        if unknown.any():
            uniq, first_pos = np.unique(ids[unknown], return_index=True)
            for u in np.argsort(first_pos, kind="stable"):
                fid = int(uniq[u])
                port = assign_random(self.registry.key_of(fid), self.bundle, self._rng)
                self._route[fid] = port
            ports = self._route[ids]
        return ports

    # -- feeding ------------------------------------------------------------

    def offer_packet(self, packet, key: FlowKey) -> bool:
        """Route and enqueue one packet; returns False when it is dropped."""
        fid = self.registry.intern(key)
        t = float(packet.timestamp)
        if t < self.now:
            raise ValueError(f"packet at {t} is before simulation time {self.now}")
        self._flush_pending(t)
        port = int(self._resolve_ports(np.array([fid], dtype=np.int64))[0])
        ok = self.links[port].offer(t, int(packet.size))
        self.now = t
        return ok

    def offer_batch(self, ts: np.ndarray, sizes: np.ndarray, ids: np.ndarray) -> np.ndarray:
        """Vector form of offer_packet for a time-sorted slice of packets."""
        if len(ts) == 0:
            return _EMPTY_ACCEPT
        if ts[0] < self.now:
            raise ValueError(f"batch starts at {ts[0]}, before simulation time {self.now}")
        accepted = np.empty(len(ts), dtype=np.bool_)
        start = 0
        while start < len(ts):
            self._flush_pending(float(ts[start]))
            stop = len(ts)
            if self._pending:
                # remaining activations are strictly after ts[start]
                cut = int(np.searchsorted(ts, self._pending[0][0], side="left"))
                if cut < stop:
                    stop = cut
            ports = self._resolve_ports(ids[start:stop])
            for p in range(self.bundle.n_ports):
                mask = ports == p
                if mask.any():
                    accepted[start:stop][mask] = self.links[p].offer_many(
                        ts[start:stop][mask], sizes[start:stop][mask])
            start = stop
        self.now = float(ts[-1])
        return accepted

    # -- time and metrics ---------------------------------------------------

    def _mark(self, t: float) -> None:
        self._marks[t] = [(link._acc_f.copy(), link._acc_i.copy()) for link in self.links]

    def run_until(self, t: float) -> None:
        """Advance every link to t and snapshot accumulators there."""
        if t < self.now:
            raise ValueError(f"cannot run backwards to {t}, now is {self.now}")
        self._flush_pending(t)
        for link in self.links:
            link.advance_to(t)
        self.now = t
        self._mark(t)

    def interval_metrics(self, start: float, end: float) -> List[Dict]:
        """Per-port metrics between two instants previously run_until'ed."""
        if not end > start:
            raise ValueError(f"need start < end, got [{start}, {end}]")
        for t in (start, end):
            if t not in self._marks:
                raise ValueError(f"no snapshot at {t}; call run_until({t}) first")
        out = []
        span = end - start
        for (f0, i0), (f1, i1) in zip(self._marks[start], self._marks[end]):
            df = f1 - f0
            di = i1 - i0
            mode_seconds = {name: float(df[m]) for m, name in enumerate(MODE_NAMES)}
            departed = int(di[_AI_DEPARTED])
            out.append({
                "energy_fraction": measured_consumption(mode_seconds, self.timings.sigma_off),
                "mode_seconds": mode_seconds,
                "span_s": span,
                "offered": int(di[_AI_OFFERED]),
                "dropped": int(di[_AI_DROPPED]),
                "departed": departed,
                "bytes_sent": int(di[_AI_BYTES_SENT]),
                "bytes_offered": int(di[_AI_BYTES_OFFERED]),
                "delay_sum_s": float(df[_AF_DELAY]),
                "mean_delay_s": float(df[_AF_DELAY]) / departed if departed else None,
            })
        return out

    def write_trace(self, path) -> None:
        """Merged per-event log: time,port,event,queue_len,mode.

        Rows at one instant order internal events (departures, transitions)
        before arrival-driven ones, then by port index.
        """
        rows = []
        for port, link in enumerate(self.links):
            for seq, (t, event, qlen, mode, arrival_driven) in enumerate(link.trace_rows()):
                rows.append((t, arrival_driven, port, seq, event, qlen, mode))
        rows.sort(key=lambda r: r[:4])
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("time,port,event,queue_len,mode\n")
            for t, _, port, _, event, qlen, mode in rows:
                fh.write(f"{t!r},{port},{event},{qlen},{mode}\n")
