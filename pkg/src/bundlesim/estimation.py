"""Per-flow demand estimation from cumulative byte counters.

Mirrors what a controller sees from periodic port/flow statistics: byte
counters only, differenced at each sampling boundary.  Flows first seen
mid-interval are scaled by the fraction of the interval they were alive, so
a newborn flow is not undercounted at its first estimate.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from .flowkey import FlowKey, FlowKeyRegistry

_GROW = 256


class FlowCounters:
    """Cumulative byte counters per flow, indexed by registry id.

    record_packet is the scalar form; record_batch updates thousands of
    packets at once against the same arrays, so the two are interchangeable.
    Flows with no traffic for two consecutive estimates are evicted and come
    back as newborn if they reappear.
    """

    def __init__(self, registry: FlowKeyRegistry):
        self.registry = registry
        n = _GROW
        self._cum = np.zeros(n, dtype=np.float64)
        self._last = np.zeros(n, dtype=np.float64)
        self._first_seen = np.zeros(n, dtype=np.float64)
        self._idle = np.zeros(n, dtype=np.int64)
        self._live = np.zeros(n, dtype=bool)

    def _ensure(self, n: int) -> None:
        if n <= len(self._cum):
            return
        size = max(n, 2 * len(self._cum))
        for name in ("_cum", "_last", "_first_seen", "_idle", "_live"):
            old = getattr(self, name)
            new = np.zeros(size, dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def _revive(self, ids: np.ndarray, first_ts: np.ndarray) -> None:
        self._cum[ids] = 0.0
        self._last[ids] = 0.0
        self._idle[ids] = 0
        self._first_seen[ids] = first_ts
        self._live[ids] = True

    def record_packet(self, key: FlowKey, size_bytes: int, now: float) -> None:
        if size_bytes < 0:
            raise ValueError(f"size must be >= 0, got {size_bytes}")
        fid = self.registry.intern(key)
        self._ensure(fid + 1)
        if not self._live[fid]:
            self._revive(np.array([fid]), np.array([now]))
        self._cum[fid] += size_bytes

    def record_batch(self, ids: np.ndarray, sizes: np.ndarray, ts: np.ndarray) -> None:
        """Vector form; ids from the shared registry, ts sorted ascending."""
        if len(ids) == 0:
            return
        self._ensure(int(ids.max()) + 1)
        uniq, first_pos = np.unique(ids, return_index=True)
        dead = ~self._live[uniq]
        if dead.any():
            self._revive(uniq[dead], ts[first_pos[dead]])
        np.add.at(self._cum, ids, sizes.astype(np.float64))

    def estimate_rates(self, interval_start: float, interval_end: float) -> Dict[FlowKey, float]:
        """Demands in bits/s over [interval_start, interval_end).

        Flows idle this interval keep a zero-rate entry; flows idle for a
        second consecutive interval are evicted and excluded.
        """
        if not interval_end > interval_start:
            raise ValueError(
                f"interval_end must exceed interval_start, got [{interval_start}, {interval_end})")
        span = interval_end - interval_start
        demands: Dict[FlowKey, float] = {}
        live_ids = np.nonzero(self._live[: len(self.registry)])[0]
        for fid in live_ids:
            delta = self._cum[fid] - self._last[fid]
            if delta == 0.0:
                self._idle[fid] += 1
                if self._idle[fid] >= 2:
                    self._live[fid] = False
                    continue
                demands[self.registry.key_of(int(fid))] = 0.0
                continue
            self._idle[fid] = 0
            alive = span
            if self._first_seen[fid] >= interval_start:
                alive = interval_end - self._first_seen[fid]
            self._last[fid] = self._cum[fid]
            demands[self.registry.key_of(int(fid))] = delta * 8.0 / alive
        return demands
