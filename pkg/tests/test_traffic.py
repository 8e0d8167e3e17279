import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bundlesim.traffic import (MAX_PACKET_BYTES, MIN_PACKET_BYTES,
                               NEXT_HOP_MAC, Packet, PacketArrays,
                               SyntheticProfile, TraceError,
                               generate_synthetic, generate_synthetic_arrays,
                               read_trace, scale_trace, write_trace)

packets_st = st.lists(
    st.builds(
        Packet,
        timestamp=st.floats(min_value=0, max_value=1e6, allow_nan=False),
        src_ip=st.integers(0, 2**32 - 1),
        dst_ip=st.integers(0, 2**32 - 1),
        dst_mac=st.integers(0, 2**48 - 1),
        size=st.integers(MIN_PACKET_BYTES, MAX_PACKET_BYTES),
    ),
    max_size=50,
).map(lambda ps: sorted(ps, key=lambda p: p.timestamp))


def write_lines(tmp_path, lines, name="trace.csv"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


def test_read_trace_three_lines(tmp_path):
    path = write_lines(tmp_path, [
        "# comment",
        "",
        "0.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,64",
        "0.5,10.0.0.1,10.0.0.3,00:11:22:33:44:55,700",
        "0.5,192.168.0.9,10.0.0.2,aa:bb:cc:dd:ee:ff,9000",
    ])
    pkts = list(read_trace(path))
    assert len(pkts) == 3
    assert [p.timestamp for p in pkts] == [0.0, 0.5, 0.5]
    assert pkts[0].src_ip == (10 << 24) | 1
    assert pkts[2].dst_mac == 0xAABBCCDDEEFF
    assert [p.size for p in pkts] == [64, 700, 9000]


def test_read_trace_example_line(tmp_path):
    path = write_lines(tmp_path, ["0.000001,10.0.0.1,192.168.1.7,00:11:22:33:44:55,1500"])
    (p,) = read_trace(path)
    assert p.timestamp == 1e-6
    assert p.dst_ip == (192 << 24) | (168 << 16) | (1 << 8) | 7
    assert p.size == 1500


@pytest.mark.parametrize("line,fragment", [
    ("0.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55", "5 comma-separated fields"),
    ("zero,10.0.0.1,10.0.0.2,00:11:22:33:44:55,64", "timestamp"),
    ("-1.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,64", "timestamp"),
    ("nan,10.0.0.1,10.0.0.2,00:11:22:33:44:55,64", "timestamp"),
    ("0.0,10.0.0.300,10.0.0.2,00:11:22:33:44:55,64", "IPv4"),
    ("0.0,10.0.0.1,bogus,00:11:22:33:44:55,64", "IPv4"),
    ("0.0,10.0.0.1,10.0.0.2,00:11:22:33:44,64", "MAC"),
    ("0.0,10.0.0.1,10.0.0.2,00-11-22-33-44-55,64", "MAC"),
    ("0.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,63", "size"),
    ("0.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,9001", "size"),
    ("0.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,big", "size"),
])
def test_read_trace_rejects_bad_line(tmp_path, line, fragment):
    path = write_lines(tmp_path, ["0.0,1.2.3.4,5.6.7.8,00:00:00:00:00:01,64", line])
    with pytest.raises(TraceError, match="line 2") as err:
        list(read_trace(path))
    assert fragment.lower() in str(err.value).lower()


def test_read_trace_rejects_backwards_time(tmp_path):
    path = write_lines(tmp_path, [
        "2.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,64",
        "1.0,10.0.0.1,10.0.0.2,00:11:22:33:44:55,64",
    ])
    with pytest.raises(TraceError, match="line 2"):
        list(read_trace(path))


@given(packets_st)
@settings(max_examples=50)
def test_trace_round_trip(tmp_path_factory, packets):
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_trace(packets, path)
    assert list(read_trace(path)) == packets


def test_scale_trace_divides_timestamps():
    pkts = [Packet(t, 1, 2, 3, 100) for t in (0.0, 10.0, 20.0)]
    assert [p.timestamp for p in scale_trace(pkts, 10.0)] == [0.0, 1.0, 2.0]
    assert list(scale_trace(pkts, 1.0)) == pkts
    doubled = [p.timestamp for p in scale_trace([Packet(0, 1, 2, 3, 100), Packet(1, 1, 2, 3, 100)], 0.5)]
    assert doubled == [0.0, 2.0]


def test_scale_trace_keeps_other_fields():
    (scaled,) = scale_trace([Packet(4.0, 7, 8, 9, 1500)], 4.0)
    assert scaled == Packet(1.0, 7, 8, 9, 1500)


@pytest.mark.parametrize("factor", [0.0, -1.0, math.inf, math.nan])
def test_scale_trace_rejects_bad_factor(factor):
    with pytest.raises(ValueError):
        list(scale_trace([], factor))


@given(packets_st, st.floats(0.01, 100), st.floats(0.01, 100))
@settings(max_examples=50)
def test_scale_trace_composes(packets, a, b):
    twice = [p.timestamp for p in scale_trace(scale_trace(packets, a), b)]
    once = [p.timestamp for p in scale_trace(packets, a * b)]
    for x, y in zip(twice, once):
        assert x == pytest.approx(y, rel=1e-12, abs=0.0)


def test_packet_arrays_round_trip():
    pkts = [Packet(0.0, 1, 2, 3, 64), Packet(1.5, 2**32 - 1, 0, 2**48 - 1, 9000)]
    arrays = PacketArrays.from_packets(pkts)
    assert len(arrays) == 2
    assert list(arrays.to_packets()) == pkts


def test_synthetic_zero_duration_is_empty():
    profile = SyntheticProfile(n_flows=5, mean_rate_bps=1e9, duration_s=0.0)
    assert list(generate_synthetic(profile)) == []


def test_synthetic_deterministic_per_seed():
    profile = SyntheticProfile(n_flows=20, mean_rate_bps=1e8, duration_s=0.2, seed=42)
    a = generate_synthetic_arrays(profile)
    b = generate_synthetic_arrays(profile)
    for name in ("ts", "src_ip", "dst_ip", "dst_mac", "size"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    c = generate_synthetic_arrays(SyntheticProfile(n_flows=20, mean_rate_bps=1e8,
                                                   duration_s=0.2, seed=43))
    assert len(a) != len(c) or not np.array_equal(a.ts, c.ts)


def test_synthetic_mean_rate_converges():
    # >1e6 packets, so the sample mean should sit well inside +/-2%
    profile = SyntheticProfile(n_flows=500, mean_rate_bps=3.25e9, duration_s=10.0, seed=1)
    arrays = generate_synthetic_arrays(profile)
    assert len(arrays) > 1_000_000
    rate = arrays.size.sum() * 8.0 / profile.duration_s
    assert rate == pytest.approx(3.25e9, rel=0.02)
    assert np.all(np.diff(arrays.ts) >= 0)
    assert np.all(arrays.dst_mac == NEXT_HOP_MAC)


def test_synthetic_destination_pool_is_fixed():
    a = generate_synthetic_arrays(SyntheticProfile(n_flows=400, mean_rate_bps=2e8,
                                                   duration_s=1.0, seed=5))
    b = generate_synthetic_arrays(SyntheticProfile(n_flows=400, mean_rate_bps=2e8,
                                                   duration_s=1.0, seed=99))
    pool = set(np.unique(a.dst_ip)) | set(np.unique(b.dst_ip))
    assert len(pool) <= 256
    # both mask ends spread: leading and trailing octets are distinct per address
    firsts = {addr >> 24 for addr in pool}
    lasts = {addr & 0xFF for addr in pool}
    assert len(firsts) == len(pool)
    assert len(lasts) == len(pool)


def test_synthetic_size_mixture():
    profile = SyntheticProfile(n_flows=10, mean_rate_bps=1e8,
                               packet_size_dist=[(64, 1.0), (1500, 3.0)],
                               duration_s=1.0, seed=2)
    assert profile.mean_packet_bytes() == pytest.approx(0.25 * 64 + 0.75 * 1500)
    arrays = generate_synthetic_arrays(profile)
    assert set(np.unique(arrays.size)) <= {64, 1500}


@pytest.mark.parametrize("kwargs", [
    dict(n_flows=0),
    dict(mean_rate_bps=0.0),
    dict(mean_rate_bps=-1e9),
    dict(zipf_exponent=-0.1),
    dict(duration_s=-1.0),
    dict(packet_size_dist=[]),
    dict(packet_size_dist=32),
    dict(packet_size_dist=[(1500, -1.0)]),
    dict(packet_size_dist=[(9500, 1.0)]),
])
def test_synthetic_profile_rejects(kwargs):
    with pytest.raises(ValueError):
        SyntheticProfile(**kwargs)
