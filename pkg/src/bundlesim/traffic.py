"""Packet records, trace file IO, time scaling, and synthetic workloads.

Trace files are plain text, one packet per line:

    timestamp_seconds,src_ipv4_dotted,dst_ipv4_dotted,dst_mac_colon_hex,size_bytes

Lines starting with ``#`` and blank lines are ignored.  Timestamps must be
monotone non-decreasing.
"""

from __future__ import annotations

import ipaddress
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Sequence, Union

import numpy as np

MIN_PACKET_BYTES = 64
MAX_PACKET_BYTES = 9000

# All synthetic traffic heads for a single next hop over the bundle.
NEXT_HOP_MAC = 0x020000000001

# The destination pool is part of the workload definition, so it is built
# from a constant and does not move with the profile seed.
_POOL_SEED = 0x5EED
DST_POOL_SIZE = 256
SRC_POOL_SIZE = 1024


class Packet(NamedTuple):
    timestamp: float  # seconds
    src_ip: int       # IPv4 address as an unsigned 32-bit int
    dst_ip: int
    dst_mac: int      # 48-bit int
    size: int         # bytes on the wire


class TraceError(ValueError):
    """Malformed or out-of-order trace input; the message names the line."""


@dataclass
class PacketArrays:
    """Column view of a packet stream, used on hot paths.

    Rows are sorted by timestamp; ``to_packets`` and ``from_packets`` convert
    to and from the scalar record form losslessly.
    """

    ts: np.ndarray       # float64, seconds
    src_ip: np.ndarray   # uint32
    dst_ip: np.ndarray   # uint32
    dst_mac: np.ndarray  # uint64, low 48 bits used
    size: np.ndarray     # int32, bytes

    def __len__(self) -> int:
        return len(self.ts)

    def to_packets(self) -> Iterator[Packet]:
        for i in range(len(self.ts)):
            yield Packet(float(self.ts[i]), int(self.src_ip[i]), int(self.dst_ip[i]),
                         int(self.dst_mac[i]), int(self.size[i]))

    @classmethod
    def from_packets(cls, packets: Iterable[Packet]) -> "PacketArrays":
        rows = list(packets)
        return cls(
            ts=np.array([p.timestamp for p in rows], dtype=np.float64),
            src_ip=np.array([p.src_ip for p in rows], dtype=np.uint32),
            dst_ip=np.array([p.dst_ip for p in rows], dtype=np.uint32),
            dst_mac=np.array([p.dst_mac for p in rows], dtype=np.uint64),
            size=np.array([p.size for p in rows], dtype=np.int32),
        )


def _parse_ip(text: str, lineno: int) -> int:
    try:
        return int(ipaddress.IPv4Address(text))
    except ipaddress.AddressValueError as exc:
        raise TraceError(f"line {lineno}: bad IPv4 address {text!r}: {exc}") from None


def _parse_mac(text: str, lineno: int) -> int:
    parts = text.split(":")
    if len(parts) != 6 or not all(len(p) == 2 for p in parts):
        raise TraceError(f"line {lineno}: bad MAC address {text!r}")
    try:
        return int("".join(parts), 16)
    except ValueError:
        raise TraceError(f"line {lineno}: bad MAC address {text!r}") from None


def read_trace(path) -> Iterator[Packet]:
    """Stream packets from a trace file, validating format and ordering."""
    last_ts = -math.inf
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if len(fields) != 5:
                raise TraceError(f"line {lineno}: expected 5 comma-separated fields, got {len(fields)}")
            try:
                ts = float(fields[0])
            except ValueError:
                raise TraceError(f"line {lineno}: bad timestamp {fields[0]!r}") from None
            if not math.isfinite(ts) or ts < 0:
                raise TraceError(f"line {lineno}: bad timestamp {fields[0]!r}, need a finite value >= 0")
            if ts < last_ts:
                raise TraceError(f"line {lineno}: timestamp {ts!r} goes backwards")
            last_ts = ts
            src = _parse_ip(fields[1], lineno)
            dst = _parse_ip(fields[2], lineno)
            mac = _parse_mac(fields[3], lineno)
            try:
                size = int(fields[4])
            except ValueError:
                raise TraceError(f"line {lineno}: bad size {fields[4]!r}") from None
            if not MIN_PACKET_BYTES <= size <= MAX_PACKET_BYTES:
                raise TraceError(
                    f"line {lineno}: size {size} outside [{MIN_PACKET_BYTES}, {MAX_PACKET_BYTES}]")
            yield Packet(ts, src, dst, mac, size)


def format_packet(p: Packet) -> str:
    return "%s,%s,%s,%s,%d" % (
        repr(p.timestamp),
        ipaddress.IPv4Address(p.src_ip),
        ipaddress.IPv4Address(p.dst_ip),
        ":".join("%02x" % b for b in p.dst_mac.to_bytes(6, "big")),
        p.size,
    )


def write_trace(packets: Iterable[Packet], path) -> None:
    """Write packets in the trace file format; round-trips with read_trace."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for p in packets:
            fh.write(format_packet(p) + "\n")


def scale_trace(packets: Iterable[Packet], factor: float) -> Iterator[Packet]:
    """Divide timestamps by ``factor``; factor 10 compresses 10x in time."""
    if not (factor > 0 and math.isfinite(factor)):
        raise ValueError(f"scale factor must be positive and finite, got {factor}")
    for p in packets:
        yield p._replace(timestamp=p.timestamp / factor)


# ---------------------------------------------------------------------------
# Synthetic workloads
# ---------------------------------------------------------------------------

# Either a constant size in bytes, or a mixture [(bytes, weight), ...].
SizeDist = Union[int, Sequence[tuple]]


@dataclass(frozen=True)
class SyntheticProfile:
    """Poisson end-to-end flows with Zipf destination popularity.

    Each of ``n_flows`` flows is an (src, dst) pair with its own Poisson
    packet process; per-flow rates are exponential weights normalised so the
    aggregate mean is ``mean_rate_bps``.  Destinations come from a fixed
    256-address pool ranked by a Zipf law with the given exponent.
    """

    n_flows: int = 3000
    mean_rate_bps: float = 3.25e9
    packet_size_dist: SizeDist = 1500
    zipf_exponent: float = 1.0
    duration_s: float = 60.0
    seed: int = 1

    def __post_init__(self):
        if self.n_flows < 1:
            raise ValueError("n_flows must be >= 1")
        if not self.mean_rate_bps > 0:
            raise ValueError("mean_rate_bps must be positive")
        if self.zipf_exponent < 0:
            raise ValueError("zipf_exponent must be >= 0")
        if self.duration_s < 0:
            raise ValueError("duration_s must be >= 0")
        _size_support(self.packet_size_dist)  # validates

    def mean_packet_bytes(self) -> float:
        sizes, weights = _size_support(self.packet_size_dist)
        return float(np.dot(sizes, weights))


def _size_support(dist: SizeDist):
    if isinstance(dist, (int, np.integer)):
        sizes = np.array([int(dist)])
        weights = np.array([1.0])
    else:
        entries = list(dist)
        if not entries:
            raise ValueError("empty packet size mixture")
        sizes = np.array([int(s) for s, _ in entries])
        weights = np.array([float(w) for _, w in entries], dtype=np.float64)
        if (weights <= 0).any():
            raise ValueError("mixture weights must be positive")
        weights = weights / weights.sum()
    for s in sizes:
        if not MIN_PACKET_BYTES <= s <= MAX_PACKET_BYTES:
            raise ValueError(f"packet size {s} outside [{MIN_PACKET_BYTES}, {MAX_PACKET_BYTES}]")
    return sizes, weights


def _address_pools():
    rng = np.random.default_rng(_POOL_SEED)
    # Distinct leading and trailing octets per destination, so masks taken
    # from either end of the address spread flows over up to 256 buckets.
    first = rng.permutation(DST_POOL_SIZE).astype(np.uint64)
    last = rng.permutation(DST_POOL_SIZE).astype(np.uint64)
    mid = rng.integers(0, 256, size=(2, DST_POOL_SIZE), dtype=np.uint64)
    dst = (first << 24) | (mid[0] << 16) | (mid[1] << 8) | last
    src = rng.integers(0, 2**32, size=SRC_POOL_SIZE, dtype=np.uint64)
    return src.astype(np.uint32), dst.astype(np.uint32)


_SRC_POOL, _DST_POOL = _address_pools()


def generate_synthetic_arrays(profile: SyntheticProfile) -> PacketArrays:
    """Column form of ``generate_synthetic``; same stream, same seed."""
    rng = np.random.default_rng(profile.seed)
    n = profile.n_flows

    ranks = np.arange(1, DST_POOL_SIZE + 1, dtype=np.float64)
    pop = ranks ** (-profile.zipf_exponent)
    pop /= pop.sum()
    dst_idx = rng.choice(DST_POOL_SIZE, size=n, p=pop)
    src_idx = rng.integers(0, SRC_POOL_SIZE, size=n)

    weights = rng.exponential(1.0, size=n)
    weights /= weights.sum()
    sizes, size_w = _size_support(profile.packet_size_dist)
    mean_size = float(np.dot(sizes, size_w))
    # packets/s per flow; superposition of the flows is Poisson with rate lam_total
    lam = weights * profile.mean_rate_bps / (8.0 * mean_size)
    lam_total = lam.sum()

    n_pkts = int(rng.poisson(lam_total * profile.duration_s))
    ts = np.sort(rng.uniform(0.0, profile.duration_s, size=n_pkts))
    flow = rng.choice(n, size=n_pkts, p=lam / lam_total)
    if len(sizes) == 1:
        pkt_sizes = np.full(n_pkts, sizes[0], dtype=np.int32)
    else:
        pkt_sizes = rng.choice(sizes, size=n_pkts, p=size_w).astype(np.int32)

    return PacketArrays(
        ts=ts,
        src_ip=_SRC_POOL[src_idx[flow]],
        dst_ip=_DST_POOL[dst_idx[flow]],
        dst_mac=np.full(n_pkts, NEXT_HOP_MAC, dtype=np.uint64),
        size=pkt_sizes,
    )


def generate_synthetic(profile: SyntheticProfile) -> Iterator[Packet]:
    """Generate the profile's packet stream, reproducible from its seed."""
    return generate_synthetic_arrays(profile).to_packets()
