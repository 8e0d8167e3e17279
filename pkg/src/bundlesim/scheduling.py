"""Flow-to-port assignment policies for a bundle of identical links.

All policies are pure functions of the demand map: sorting is total
(demand descending, then FlowKey ascending) so repeated calls with the same
demands give identical assignments regardless of dict insertion order.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Mapping

from .flowkey import FlowKey, key_order

DemandMap = Mapping[FlowKey, float]


@dataclass(frozen=True)
class BundleConfig:
    n_ports: int
    port_capacity_bps: float

    def __post_init__(self):
        if self.n_ports < 1:
            raise ValueError(f"n_ports must be >= 1, got {self.n_ports}")
        if not self.port_capacity_bps > 0:
            raise ValueError(f"port_capacity_bps must be positive, got {self.port_capacity_bps}")

    @property
    def total_capacity_bps(self) -> float:
        return self.n_ports * self.port_capacity_bps


@dataclass
class Assignment:
    flow_to_port: Dict[FlowKey, int]
    port_loads: List[float]

    def ports_used(self) -> int:
        return sum(1 for load in self.port_loads if load > 0)


def _flows_by_demand(demands: DemandMap):
    for key, d in demands.items():
        if d < 0:
            raise ValueError(f"negative demand {d} for {key}")
    return sorted(demands.items(), key=lambda kv: (-kv[1], key_order(kv[0])))


def _least_loaded(loads: List[float]) -> int:
    return min(range(len(loads)), key=lambda p: (loads[p], p))


def assign_random(key: FlowKey, bundle: BundleConfig, rng: random.Random) -> int:
    """Uniform port choice; the reactive fallback for flows with no rule."""
    return rng.randrange(bundle.n_ports)


def assign_equitable(demands: DemandMap, bundle: BundleConfig) -> Assignment:
    """Spread load over all ports: largest demand first to the least loaded."""
    loads = [0.0] * bundle.n_ports
    mapping: Dict[FlowKey, int] = {}
    for key, d in _flows_by_demand(demands):
        p = _least_loaded(loads)
        mapping[key] = p
        loads[p] += d
    return Assignment(mapping, loads)


def assign_greedy(demands: DemandMap, bundle: BundleConfig) -> Assignment:
    """Pack the busiest port that still fits; overflow to the least loaded."""
    cap = bundle.port_capacity_bps
    loads = [0.0] * bundle.n_ports
    mapping: Dict[FlowKey, int] = {}
    for key, d in _flows_by_demand(demands):
        order = sorted(range(bundle.n_ports), key=lambda p: (-loads[p], p))
        for p in order:
            if loads[p] + d <= cap:
                break
        else:
            p = _least_loaded(loads)
        mapping[key] = p
        loads[p] += d
    return Assignment(mapping, loads)


def assign_bounded_greedy(demands: DemandMap, bundle: BundleConfig, bound: float) -> Assignment:
    """Greedy packing that keeps headroom on each port.

    A port already carrying k flows accepts a flow only if the new load stays
    at or below capacity - bound/(k+1): the full bound is reserved while a
    port has a single flow and relaxes as flows accumulate.  bound = 0 is
    exactly assign_greedy.
    """
    cap = bundle.port_capacity_bps
    if not 0 <= bound <= cap:
        raise ValueError(f"bound must be in [0, port capacity], got {bound}")
    loads = [0.0] * bundle.n_ports
    nflows = [0] * bundle.n_ports
    mapping: Dict[FlowKey, int] = {}
    for key, d in _flows_by_demand(demands):
        order = sorted(range(bundle.n_ports), key=lambda p: (-loads[p], p))
        for p in order:
            if loads[p] + d <= cap - bound / (nflows[p] + 1):
                break
        else:
            p = _least_loaded(loads)
        mapping[key] = p
        loads[p] += d
        nflows[p] += 1
    return Assignment(mapping, loads)


def assign_conservative(demands: DemandMap, bundle: BundleConfig, margin: float) -> Assignment:
    """Spread load equitably over just enough ports for the total demand.

    The active port count is ceil(total * (1 + margin) / capacity), clamped
    to [1, n_ports]; remaining ports receive nothing and can sleep through
    the whole interval.
    """
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    total = sum(demands.values())
    active = math.ceil(total * (1.0 + margin) / bundle.port_capacity_bps)
    active = max(1, min(bundle.n_ports, active))
    loads = [0.0] * bundle.n_ports
    mapping: Dict[FlowKey, int] = {}
    for key, d in _flows_by_demand(demands):
        p = min(range(active), key=lambda q: (loads[q], q))
        mapping[key] = p
        loads[p] += d
    return Assignment(mapping, loads)
