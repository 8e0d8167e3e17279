"""Flow aggregation keys: a run of IP address bits, optionally plus the MAC.

Packets sharing a key form one aggregated flow; the scheduler moves these
aggregates, never individual (src, dst) pairs.  Bit offsets count from the
most significant bit of the chosen address field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np


@dataclass(frozen=True)
class MaskSpec:
    field: str = "dst_ip"        # "dst_ip" or "src_ip"
    offset_bits: int = 0         # from the MSB
    length_bits: int = 8
    combine_with_mac: bool = True

    def __post_init__(self):
        if self.field not in ("dst_ip", "src_ip"):
            raise ValueError(f"field must be 'dst_ip' or 'src_ip', got {self.field!r}")
        if not 0 <= self.offset_bits <= 31:
            raise ValueError(f"offset_bits must be in [0, 31], got {self.offset_bits}")
        if not 1 <= self.length_bits <= 32:
            raise ValueError(f"length_bits must be in [1, 32], got {self.length_bits}")
        if self.offset_bits + self.length_bits > 32:
            raise ValueError("offset_bits + length_bits must not exceed 32")

    @property
    def key_space(self) -> int:
        return 1 << self.length_bits


class FlowKey(NamedTuple):
    mac_part: Optional[int]  # None when the mask ignores the MAC
    bits_part: int


def key_order(key: FlowKey) -> Tuple:
    """A total order over keys even when mac_part mixes None and ints."""
    m = key.mac_part
    return (m is not None, m if m is not None else 0, key.bits_part)


def flow_key(packet, spec: MaskSpec) -> FlowKey:
    addr = packet.dst_ip if spec.field == "dst_ip" else packet.src_ip
    shift = 32 - spec.offset_bits - spec.length_bits
    bits = (int(addr) >> shift) & ((1 << spec.length_bits) - 1)
    return FlowKey(int(packet.dst_mac) if spec.combine_with_mac else None, bits)


def flow_key_raw(arrays, spec: MaskSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Vector form over PacketArrays: per-packet raw uint64 keys.

    Raw key = (mac_index + 1) << 32 | bits with MACs interned against the
    returned table, or just the bits when the mask ignores MACs.  The table
    must come from the whole stream so ids stay stable across slices.
    """
    addrs = arrays.dst_ip if spec.field == "dst_ip" else arrays.src_ip
    shift = np.uint32(32 - spec.offset_bits - spec.length_bits)
    mask = np.uint32((1 << spec.length_bits) - 1) if spec.length_bits < 32 else np.uint32(0xFFFFFFFF)
    bits = ((addrs >> shift) & mask).astype(np.uint64)
    if not spec.combine_with_mac:
        return bits, np.empty(0, dtype=np.uint64)
    mac_table, inverse = np.unique(arrays.dst_mac, return_inverse=True)
    raw = ((inverse.astype(np.uint64) + np.uint64(1)) << np.uint64(32)) | bits
    return raw, mac_table


def raw_to_key(raw: int, mac_table: np.ndarray) -> FlowKey:
    raw = int(raw)
    if raw < 1 << 32:
        return FlowKey(None, raw)
    return FlowKey(int(mac_table[(raw >> 32) - 1]), raw & 0xFFFFFFFF)


@dataclass
class FlowHistogram:
    """Distinct original (src, dst) pairs per aggregated flow."""

    counts: Dict[FlowKey, int]
    total_original_flows: int


def flow_distribution(packets: Iterable, spec: MaskSpec) -> FlowHistogram:
    """Count how many distinct (src, dst) pairs each key aggregates."""
    seen = set()
    counts: Dict[FlowKey, int] = {}
    for p in packets:
        pair = (p.src_ip, p.dst_ip)
        if pair in seen:
            continue
        seen.add(pair)
        key = flow_key(p, spec)
        counts[key] = counts.get(key, 0) + 1
    return FlowHistogram(counts=counts, total_original_flows=len(seen))


def histogram_variance(hist: FlowHistogram, key_space: int) -> float:
    """Population variance of per-bucket counts over all key_space buckets.

    Buckets are bits_part values; keys differing only in MAC fold into the
    same bucket.  Absent buckets count as zero.
    """
    if key_space < 1:
        raise ValueError(f"key_space must be >= 1, got {key_space}")
    buckets = np.zeros(key_space, dtype=np.float64)
    for key, count in hist.counts.items():
        if key.bits_part >= key_space:
            raise ValueError(
                f"key {key.bits_part} outside key_space {key_space}; "
                "pass 2**length_bits of the mask that built the histogram")
        buckets[key.bits_part] += count
    return float(buckets.var())


def export_histogram(hist: FlowHistogram, key_space: int, path) -> None:
    """CSV of non-empty buckets (key,count) plus a trailing variance line."""
    variance = histogram_variance(hist, key_space)
    buckets: Dict[int, int] = {}
    for key, count in hist.counts.items():
        buckets[key.bits_part] = buckets.get(key.bits_part, 0) + count
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,count\n")
        for b in sorted(buckets):
            fh.write(f"{b},{buckets[b]}\n")
        fh.write(f"#variance,{variance!r}\n")


class FlowKeyRegistry:
    """Dense integer ids for flow keys, shared by counters and the simulator.

    Ids are assigned in first-appearance order and never reused, so array
    state indexed by id stays valid for the life of a run.
    """

    def __init__(self, spec: MaskSpec):
        self.spec = spec
        self._id_by_key: Dict[FlowKey, int] = {}
        self._id_by_raw: Dict[int, int] = {}
        self._keys: List[FlowKey] = []

    def __len__(self) -> int:
        return len(self._keys)

    def intern(self, key: FlowKey) -> int:
        fid = self._id_by_key.get(key)
        if fid is None:
            fid = len(self._keys)
            self._id_by_key[key] = fid
            self._keys.append(key)
        return fid

    def intern_raw(self, raw: np.ndarray, mac_table: np.ndarray) -> np.ndarray:
        """Ids for a slice of raw keys; new keys interned in appearance order."""
        uniq, first_pos, inverse = np.unique(raw, return_index=True, return_inverse=True)
        ids = np.empty(len(uniq), dtype=np.int64)
        new_order = np.argsort(first_pos, kind="stable")
        for u in new_order:
            r = int(uniq[u])
            fid = self._id_by_raw.get(r)
            if fid is None:
                key = raw_to_key(r, mac_table)
                fid = self.intern(key)
                self._id_by_raw[r] = fid
            ids[u] = fid
        return ids[inverse]

    def key_of(self, fid: int) -> FlowKey:
        return self._keys[fid]
