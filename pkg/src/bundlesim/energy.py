"""Closed-form consumption of EEE links and the bundle-wide optimum.

A link in frame-transmission mode serves traffic at full power and, whenever
its queue drains, pays a sleep transition, idles in LPI at a fraction
sigma_off of full power, and pays a wake transition on the next arrival.
With Poisson arrivals the expected consumption at load rho has a closed
form; the least possible bundle consumption at a given total load follows by
water-filling, since it is always cheaper to saturate one port than to keep
two half-awake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Mapping

from .scheduling import BundleConfig

# 802.3az 10GBASE-T transition times and LPI power floor.
STD_T_SLEEP_S = 2.28e-6
STD_T_WAKE_S = 4.48e-6
STD_SIGMA_OFF = 0.1
STD_CAPACITY_BPS = 10e9


@dataclass(frozen=True)
class EnergyParams:
    """Inputs of the consumption model for one link."""

    mu: float         # service rate at full capacity, packets/s
    t_sleep: float    # seconds
    t_wake: float     # seconds
    sigma_off: float  # LPI power as a fraction of active power

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.t_sleep < 0 or self.t_wake < 0:
            raise ValueError("transition times must be >= 0")
        if not 0 <= self.sigma_off <= 1:
            raise ValueError(f"sigma_off must be in [0, 1], got {self.sigma_off}")

    @classmethod
    def for_link(cls, capacity_bps: float, mean_packet_bytes: float = 1500.0,
                 t_sleep: float = STD_T_SLEEP_S, t_wake: float = STD_T_WAKE_S,
                 sigma_off: float = STD_SIGMA_OFF) -> "EnergyParams":
        return cls(mu=capacity_bps / (8.0 * mean_packet_bytes),
                   t_sleep=t_sleep, t_wake=t_wake, sigma_off=sigma_off)


def expected_toff(rho: float, params: EnergyParams) -> float:
    """Mean LPI time per sleep cycle, in seconds.

    With Poisson arrivals at rate mu*rho the link reaches LPI only when no
    packet lands during the sleep transition, then stays for an exponential
    residual: exp(-mu rho t_sleep) / (mu rho).
    """
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"load must be in (0, 1], got {rho}")
    lam = params.mu * rho
    return math.exp(-lam * params.t_sleep) / lam


def sigma(rho: float, params: EnergyParams) -> float:
    """Expected consumption of one link at load rho, fraction of full power.

    The link serves a rho fraction of the time; every idle period costs one
    sleep and one wake transition at full power around the LPI stretch, so
    only E[T_off] / (E[T_off] + t_sleep + t_wake) of the idle time is cheap:

        sigma = 1 - (1 - sigma_off)(1 - rho) E[T_off] / (E[T_off] + t_s + t_w)

    The endpoints are pinned to the analytic limits sigma(0) = sigma_off and
    sigma(1) = 1.
    """
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"load must be in [0, 1], got {rho}")
    if rho == 0.0:
        return params.sigma_off
    if rho == 1.0:
        return 1.0
    # toff / (toff + t_s + t_w) rewritten so neither a huge toff (rho ~ 0)
    # nor an underflowing one (rho ~ 1 at large mu) can produce inf/inf
    lam = params.mu * rho
    exponent = lam * params.t_sleep
    if exponent > 700.0:  # exp() would overflow; the link never reaches LPI
        return 1.0
    denom = 1.0 + (params.t_sleep + params.t_wake) * lam * math.exp(exponent)
    lpi_share = (1.0 - rho) / denom
    return 1.0 - (1.0 - params.sigma_off) * lpi_share


def waterfill(total_load: float, bundle: BundleConfig) -> List[float]:
    """Split total_load (bits/s) over the bundle: full ports, then one partial.

    Returns per-port loads in non-increasing order summing to total_load
    exactly; raises if the load exceeds the bundle capacity.
    """
    if total_load < 0:
        raise ValueError(f"total_load must be >= 0, got {total_load}")
    cap = bundle.port_capacity_bps
    if total_load > bundle.total_capacity_bps * (1 + 1e-12):
        raise ValueError(
            f"total_load {total_load} exceeds bundle capacity {bundle.total_capacity_bps}")
    full = min(int(total_load // cap), bundle.n_ports)
    loads = [cap] * full
    remainder = total_load - full * cap
    if len(loads) < bundle.n_ports and remainder > 0:
        loads.append(min(remainder, cap))
    loads.extend([0.0] * (bundle.n_ports - len(loads)))
    return loads


def bundle_lower_bound(total_load: float, bundle: BundleConfig,
                       params: EnergyParams) -> float:
    """Least achievable mean consumption of the bundle at the given load."""
    loads = waterfill(total_load, bundle)
    cap = bundle.port_capacity_bps
    return sum(sigma(min(load / cap, 1.0), params) for load in loads) / bundle.n_ports


def measured_consumption(mode_seconds: Mapping[str, float], sigma_off: float) -> float:
    """Consumption fraction from accumulated per-mode times.

    Only LPI time is cheap; ACTIVE and both transition modes burn full
    power.  Keys are mode names as reported by the link simulator.
    """
    total = sum(mode_seconds.values())
    if not total > 0:
        raise ValueError("mode times must cover a positive span")
    lpi = mode_seconds.get("LPI", 0.0)
    return ((total - lpi) + sigma_off * lpi) / total
