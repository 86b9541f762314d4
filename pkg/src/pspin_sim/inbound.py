"""Simulation-side NIC inbound engine.

Ingests a packet trace at a configurable injection rate (unlimited by
default, to probe maximum throughput), matches packets to execution
contexts, writes matched packets into the L2 packet buffer through the
inbound-exclusive write port, and emits one HER per packet once the
write completes.  Completion notifications flow back here to free
buffer space; a full buffer, an exhausted MPQ pool, or a full HER queue
stall injection (backpressure) rather than dropping packets.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

from .config import ExecutionContext, HER, Packet, PacketKind, PsPINConfig
from .engine import SimulationError, Simulator, StatsRecorder
from .memory import MemorySystem
from .trace import PacketTrace


class RingAllocator:
    """Ring buffer with arbitrary-order frees and prefix-only reclamation.

    Allocations advance a virtual tail; frees only reclaim space once
    every older allocation is also free, mirroring a hardware head
    pointer that chases the oldest live packet.
    """

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self.v_head = 0
        self.v_tail = 0
        self._order: deque[int] = deque()  # alloc ids in allocation order
        self._alloc: dict[int, tuple[int, int]] = {}  # id -> (virt, size)
        self._freed: set[int] = set()
        self._next_id = 0
        self.padding_bytes = 0

    @property
    def live_bytes(self) -> int:
        return self.v_tail - self.v_head

    @property
    def free_bytes(self) -> int:
        return self.capacity - self.live_bytes

    def would_fit(self, size: int) -> bool:
        """True when alloc(size) would succeed, including wrap padding."""
        if size > self.capacity:
            return False
        v = self.v_tail
        phys = v % self.capacity
        if phys + size > self.capacity:
            v += self.capacity - phys
        return v + size - self.v_head <= self.capacity

    def alloc(self, size: int) -> tuple[int, int] | None:
        """Returns (alloc_id, physical_offset) or None when it does not fit."""
        if size > self.capacity:
            return None
        v = self.v_tail
        phys = v % self.capacity
        pad = 0
        if phys + size > self.capacity:
            pad = self.capacity - phys  # skip the wrap fragment
            v += pad
            phys = 0
        if v + size - self.v_head > self.capacity:
            return None
        self.padding_bytes += pad
        self.v_tail = v + size
        aid = self._next_id
        self._next_id += 1
        self._alloc[aid] = (v, size)
        self._order.append(aid)
        return aid, phys

    def free(self, aid: int) -> None:
        if aid not in self._alloc or aid in self._freed:
            raise SimulationError(f"double free of packet allocation {aid}")
        self._freed.add(aid)
        # Advance the head over the contiguous freed prefix.
        while self._order and self._order[0] in self._freed:
            head_id = self._order.popleft()
            self._freed.discard(head_id)
            v, size = self._alloc.pop(head_id)
            self.v_head = v + size
        if not self._order:
            self.v_head = self.v_tail

    def live_allocations(self) -> int:
        return len(self._alloc) - len(self._freed)


class MpqPool:
    """Fixed pool of message queue ids, reused after idle feedback."""

    def __init__(self, size: int) -> None:
        self._free = list(range(size - 1, -1, -1))  # pop() yields ascending ids

    def acquire(self) -> int | None:
        return self._free.pop() if self._free else None

    def release(self, mpq_id: int) -> None:
        self._free.append(mpq_id)

    @property
    def available(self) -> int:
        return len(self._free)


class NicInbound:
    def __init__(
        self,
        sim: Simulator,
        cfg: PsPINConfig,
        mem: MemorySystem,
        trace: PacketTrace,
        contexts: list[ExecutionContext],
        rate_gbps: float | None = None,
    ) -> None:
        self.sim = sim
        self.cfg = cfg
        self.mem = mem
        self.trace = trace
        self.contexts = contexts
        self.ring = RingAllocator(cfg.l2_pkt_buffer_bytes)
        self.pool = MpqPool(cfg.mpq_pool_size)
        self.scheduler = None  # wired by the simulation assembly
        self.stats: StatsRecorder = sim.stats
        self._cursor = 0
        self._stalled = False
        self._attempt_pending = False
        self._wire_clock = Fraction(0)
        self._rate_bits = Fraction(rate_gbps) if rate_gbps else None
        self._msg_mpq: dict[int, int] = {}  # active msg_id -> mpq id
        self.in_flight = 0
        self.done = False

    def start(self) -> None:
        self._schedule_attempt(0)

    def _schedule_attempt(self, at: int) -> None:
        if not self._attempt_pending:
            self._attempt_pending = True
            self.sim.schedule(max(at, self.sim.now), self._try_inject)

    def wake(self) -> None:
        """Called when buffer space, MPQ ids, or HER queue slots free up."""
        if self._stalled:
            self._stalled = False
            self._schedule_attempt(self.sim.now)

    def match(self, pkt: Packet) -> ExecutionContext | None:
        """Deterministic first-match on the flow key: earliest installed wins."""
        for ctx in self.contexts:
            if pkt.flow.startswith(ctx.flow_prefix):
                return ctx
        return None

    def _try_inject(self) -> None:
        self._attempt_pending = False
        now = self.sim.now
        while self._cursor < len(self.trace.packets):
            pkt = self.trace.packets[self._cursor]

            # Rate pacing: the wire delivers size*8 bits per packet.
            if self._rate_bits is not None:
                ready = self._wire_clock
                if ready > now:
                    self._schedule_attempt(int(ready.__ceil__()))
                    return
            if (
                self.trace.arrival_offsets is not None
                and self.trace.arrival_offsets[self._cursor] > now
            ):
                self._schedule_attempt(self.trace.arrival_offsets[self._cursor])
                return

            ctx = self.match(pkt)
            if ctx is None:
                self.stats.bump("bypassed_packets")
                self._advance_wire(pkt)
                self._cursor += 1
                continue

            # Backpressure conditions: stall, do not drop.
            if self.scheduler.her_queue_len() >= self.cfg.her_queue_depth:
                self._stalled = True
                self.stats.bump("inbound_stall_her_queue")
                return
            if pkt.kind == PacketKind.HEADER and self.pool.available == 0:
                self._stalled = True
                self.stats.bump("inbound_stall_mpq_pool")
                return
            got = self.ring.alloc(pkt.size_bytes)
            if got is None:
                self._stalled = True
                self.stats.bump("inbound_stall_buffer_full")
                return
            aid, phys = got

            if pkt.kind == PacketKind.HEADER:
                mpq_id = self.pool.acquire()
                self._msg_mpq[pkt.msg_id] = mpq_id
            else:
                mpq_id = self._msg_mpq.get(pkt.msg_id)
                if mpq_id is None:
                    # Header-first violation survived trace validation
                    # (e.g. after a stale reset); count and drop.
                    self.stats.bump("protocol_violations")
                    self.ring.free(aid)
                    self._advance_wire(pkt)
                    self._cursor += 1
                    continue

            start, end = self.mem.ingress_write(now, phys, pkt.size_bytes)
            if self.stats.first_injection is None:
                self.stats.first_injection = start
            her = HER(
                l2_addr=phys,
                size_bytes=pkt.size_bytes,
                mpq_id=mpq_id,
                ctx_id=ctx.ctx_id,
                eom=pkt.eom,
                kind=pkt.kind,
                msg_id=pkt.msg_id,
                uid=pkt.uid,
                alloc_id=aid,
            )
            self.in_flight += 1
            self.stats.bump("injected_packets")
            self.sim.schedule(end, self.scheduler.submit_her, her, pkt)
            self._advance_wire(pkt)
            self._cursor += 1
            if pkt.eom:
                del self._msg_mpq[pkt.msg_id]
            self._schedule_attempt(end)
            return
        self.done = True

    def _advance_wire(self, pkt: Packet) -> None:
        # The wire delivers continuously at its own rate; injection may
        # fall behind under backpressure and catch up at port speed, but
        # the schedule itself never resets.
        if self._rate_bits is not None:
            self._wire_clock += Fraction(pkt.size_bytes * 8) / self._rate_bits

    # Completion path (notification forwarded by the scheduler).

    def free_packet(self, alloc_id: int) -> None:
        self.ring.free(alloc_id)
        self.in_flight -= 1
        self.stats.bump("completed_packets")
        self.wake()

    def drop_packet(self, alloc_id: int) -> None:
        """Stale-queue reset path: space is reclaimed, packet uncounted."""
        self.ring.free(alloc_id)
        self.in_flight -= 1
        self.stats.bump("dropped_stale_packets")
        self.wake()

    def mpq_idle(self, mpq_id: int) -> None:
        self.pool.release(mpq_id)
        self.wake()
