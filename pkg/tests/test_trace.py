import pytest

from pspin_sim import PacketKind, load_trace, make_trace, save_trace
from pspin_sim.trace import TraceError, split_message


def test_split_counts_and_eom():
    # 1 MiB at 1024-byte MTU -> 1024 packets, last carries the eom flag
    pkts = split_message(0, b"f", 1024 * 1024, 1024)
    assert len(pkts) == 1024
    assert pkts[0].kind == PacketKind.HEADER
    assert all(p.kind == PacketKind.PAYLOAD for p in pkts[1:])
    assert [p.eom for p in pkts].count(True) == 1
    assert pkts[-1].eom


def test_split_pads_runt_tail():
    pkts = split_message(0, b"f", 100, 64)
    assert [p.size_bytes for p in pkts] == [64, 64]
    assert pkts[1].msg_offset == 64


def test_single_packet_message_is_header_with_eom():
    pkts = split_message(7, b"f", 64, 64)
    assert len(pkts) == 1
    assert pkts[0].kind == PacketKind.HEADER and pkts[0].eom


def test_payload_before_header_rejected(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_text("5 00 64 payload 1\n")
    with pytest.raises(TraceError, match="precedes"):
        load_trace(str(path))


def test_malformed_line_reports_position(tmp_path):
    path = tmp_path / "bad.trace"
    path.write_text("0 00 64 header\n")
    with pytest.raises(TraceError, match=":1"):
        load_trace(str(path))


def test_file_round_trip(tmp_path):
    trace = make_trace(3, 256, 64, flows=2, interleave="rr",
                       payload_fn=lambda m, i, o, c: bytes([m * 16 + i] * c))
    path = tmp_path / "t.trace"
    save_trace(trace, str(path))
    loaded = load_trace(str(path))
    assert len(loaded) == len(trace)
    for a, b in zip(loaded.packets, trace.packets):
        assert (a.msg_id, a.flow, a.size_bytes, a.kind, a.eom) == (
            b.msg_id, b.flow, b.size_bytes, b.kind, b.eom,
        )
        assert a.payload == b.payload


def test_rr_interleave_alternates_flows():
    trace = make_trace(2, 192, 64, flows=2, interleave="rr")
    flows = [p.flow for p in trace.packets[:4]]
    assert flows[0] != flows[1]


def test_validate_catches_runt():
    trace = make_trace(1, 64, 64)
    trace.packets[0].size_bytes = 32
    assert any("below 64" in p for p in trace.validate())
