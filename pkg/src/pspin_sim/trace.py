"""Packet traces: file format, validation, and synthetic generators.

Trace files are line-oriented:

    msg_id flow_hex size kind eom [payload_hex]

`kind` is `header` or `payload`, `eom` is 0/1, and the payload column is
optional (workloads that read packet contents regenerate them from a
seed instead of storing megabytes of hex).  A message's header must
precede its payloads and its last packet carries the end-of-message
flag; the NIC-facing contract is header-first delivery.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import Packet, PacketKind

MIN_PACKET_BYTES = 64


class TraceError(ValueError):
    pass


@dataclass
class PacketTrace:
    packets: list[Packet] = field(default_factory=list)
    arrival_offsets: list[int] | None = None  # optional per-packet cycles

    def __len__(self) -> int:
        return len(self.packets)

    def total_payload_bits(self) -> int:
        return sum(p.size_bytes * 8 for p in self.packets)

    def validate(self) -> list[str]:
        problems: list[str] = []
        seen_header: set[int] = set()
        eom_seen: set[int] = set()
        last_index: dict[int, int] = {}
        for i, p in enumerate(self.packets):
            last_index[p.msg_id] = i
            if p.size_bytes < MIN_PACKET_BYTES:
                problems.append(f"packet {i}: size {p.size_bytes} below 64 B minimum")
            if p.kind == PacketKind.HEADER:
                if p.msg_id in seen_header:
                    problems.append(f"packet {i}: duplicate header for msg {p.msg_id}")
                seen_header.add(p.msg_id)
            else:
                if p.msg_id not in seen_header:
                    problems.append(
                        f"packet {i}: payload for msg {p.msg_id} precedes its header"
                    )
            if p.msg_id in eom_seen:
                problems.append(f"packet {i}: msg {p.msg_id} continues past its eom")
            if p.eom:
                eom_seen.add(p.msg_id)
        for msg in seen_header - eom_seen:
            problems.append(f"msg {msg}: no eom packet")
        return problems


def load_trace(path: str) -> PacketTrace:
    trace = PacketTrace()
    uid = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (5, 6):
                raise TraceError(f"{path}:{lineno}: expected 5 or 6 fields")
            try:
                msg_id = int(parts[0])
                flow = bytes.fromhex(parts[1])
                size = int(parts[2])
                kind = PacketKind(parts[3])
                eom = bool(int(parts[4]))
                payload = bytes.fromhex(parts[5]) if len(parts) == 6 else b""
            except ValueError as exc:
                raise TraceError(f"{path}:{lineno}: {exc}") from exc
            trace.packets.append(
                Packet(msg_id, flow, size, kind, eom, payload, uid=uid)
            )
            uid += 1
    problems = trace.validate()
    if problems:
        raise TraceError(f"{path}: " + "; ".join(problems[:5]))
    return trace


def save_trace(trace: PacketTrace, path: str) -> None:
    with open(path, "w") as fh:
        for p in trace.packets:
            line = (
                f"{p.msg_id} {p.flow.hex()} {p.size_bytes} {p.kind.value} {int(p.eom)}"
            )
            if p.payload:
                line += f" {p.payload.hex()}"
            fh.write(line + "\n")


def split_message(
    msg_id: int,
    flow: bytes,
    msg_bytes: int,
    mtu: int,
    payload_fn=None,
    uid_start: int = 0,
) -> list[Packet]:
    """Frame one message into MTU-sized packets, header first, eom last."""
    if mtu < MIN_PACKET_BYTES:
        raise TraceError(f"mtu {mtu} below the 64 B packet minimum")
    npkts = max(1, -(-msg_bytes // mtu))
    packets = []
    off = 0
    for i in range(npkts):
        chunk = min(mtu, msg_bytes - off) if msg_bytes else mtu
        size = max(MIN_PACKET_BYTES, chunk)
        payload = payload_fn(msg_id, i, off, chunk) if payload_fn else b""
        packets.append(
            Packet(
                msg_id=msg_id,
                flow=flow,
                size_bytes=size,
                kind=PacketKind.HEADER if i == 0 else PacketKind.PAYLOAD,
                eom=(i == npkts - 1),
                payload=payload,
                uid=uid_start + i,
                msg_offset=off,
            )
        )
        off += chunk
    return packets


def make_trace(
    n_msgs: int,
    msg_bytes: int,
    mtu: int,
    flows: int = 1,
    interleave: str = "seq",
    payload_fn=None,
    flow_of_msg=None,
) -> PacketTrace:
    """Synthetic trace of `n_msgs` messages split at `mtu`.

    `interleave="rr"` round-robins packets across `flows` concurrent
    message streams (messages are dealt to flows round-robin and each
    flow sends its messages back to back); `"seq"` plays messages out
    one after another.
    """
    if flows < 1:
        raise TraceError("flows must be >= 1")
    messages: list[list[Packet]] = []
    for m in range(n_msgs):
        flow_key = flow_of_msg(m) if flow_of_msg else (m % flows).to_bytes(4, "big")
        messages.append(split_message(m, flow_key, msg_bytes, mtu, payload_fn=payload_fn))
    trace = PacketTrace()
    if interleave == "seq":
        for pkts in messages:
            trace.packets.extend(pkts)
    elif interleave == "rr":
        streams: list[list[Packet]] = [[] for _ in range(flows)]
        for m, pkts in enumerate(messages):
            streams[m % flows].extend(pkts)
        cursors = [0] * flows
        remaining = sum(len(s) for s in streams)
        while remaining:
            for f in range(flows):
                if cursors[f] < len(streams[f]):
                    trace.packets.append(streams[f][cursors[f]])
                    cursors[f] += 1
                    remaining -= 1
    else:
        raise TraceError(f"unknown interleave mode {interleave!r}")
    for uid, p in enumerate(trace.packets):
        p.uid = uid
    problems = trace.validate()
    if problems:
        raise TraceError("; ".join(problems[:5]))
    return trace
