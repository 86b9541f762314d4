"""Command units: NIC outbound engine, off-cluster DMA, and the host side.

Both engines pull data out of PsPIN memories (sharing the L2 packet
buffer's host-side read port, each reaching 256 Gbit/s under full dual
load) and push it into a fixed-rate sink: the NIC outbound drain or the
PCIe model.  A command's response returns to the issuing HPU driver once
the data has fully drained, and completion notifications stay gated on
those responses.
"""

from __future__ import annotations

from bisect import bisect_right

from .config import Command, CommandKind
from .engine import Simulator
from .memory import MemorySystem, RateSink

ERROR_DESCRIPTOR_BASE = 1 << 48


class HostMemory:
    """Host-side byte-addressable sink with named regions for oracles."""

    def __init__(self) -> None:
        self._regions: list[tuple[int, int, bytearray, str]] = []
        self.stray_writes: dict[int, bytes] = {}

    def register(self, name: str, base: int, size: int) -> None:
        self._regions.append((base, size, bytearray(size), name))

    def write(self, addr: int, data: bytes) -> None:
        for base, size, buf, _name in self._regions:
            if base <= addr and addr + len(data) <= base + size:
                buf[addr - base : addr - base + len(data)] = data
                return
        self.stray_writes[addr] = bytes(data)

    def region(self, name: str) -> bytearray:
        for _base, _size, buf, rname in self._regions:
            if rname == name:
                return buf
        raise KeyError(name)


class CommandEngine:
    """Shared machinery: bounded command queue, source read, sink drain."""

    def __init__(
        self,
        sim: Simulator,
        mem: MemorySystem,
        sink: RateSink,
        host: HostMemory,
        queue_depth: int,
        drain_log: list[tuple[int, int]],
    ) -> None:
        self.sim = sim
        self.mem = mem
        self.sink = sink
        self.host = host
        self.queue_depth = queue_depth
        self.drain_log = drain_log
        self.clusters = []  # wired by assembly
        self._done_times: list[int] = []
        self._head = 0

    def earliest_slot(self, at: int) -> int:
        """Earliest cycle >= `at` with a free queue slot."""
        dt = self._done_times
        idx = bisect_right(dt, at, self._head)
        if len(dt) - idx < self.queue_depth:
            return at
        return dt[len(dt) - self.queue_depth]

    def _note_done(self, done: int) -> None:
        self._done_times.append(done)
        if self._head > 8192:
            del self._done_times[: self._head]
            self._head = 0
        dt = self._done_times
        h = self._head
        now = self.sim.now
        while h < len(dt) and dt[h] <= now:
            h += 1
        self._head = h

    def submit(self, cmd: Command) -> None:
        now = self.sim.now
        read_end = self.mem.command_read(
            now, cmd.src_region, cmd.cluster, cmd.src_offset, cmd.length
        )
        # The response fires once the data has left PsPIN memory (the
        # source space is reusable then); the sink drain that follows is
        # pure downstream bandwidth and bounds the queue slot instead.
        drained = self.sink.drain(read_end, cmd.length)
        self._note_done(drained)
        self.sim.schedule(read_end, self._respond, cmd)
        self.sim.schedule(drained, self._drained, cmd)

    def _respond(self, cmd: Command) -> None:
        task = cmd.task_ref
        if task is not None:
            self.clusters[task.cluster].hpus[task.hpu].on_cmd_response(task)

    def _drained(self, cmd: Command) -> None:
        self.drain_log.append((self.sim.now, cmd.length * 8))
        self._deliver(cmd)

    def _deliver(self, cmd: Command) -> None:
        raise NotImplementedError


class NicOutboundEngine(CommandEngine):
    """Reads command sources and sends them over the network."""

    def __init__(self, sim, mem, host, queue_depth: int) -> None:
        super().__init__(sim, mem, mem.nic_outbound, host, queue_depth, sim.stats.tx_log)
        self.sent_packets: list[bytes] = []

    def _deliver(self, cmd: Command) -> None:
        self.sim.stats.bump("nic_puts_sent")
        if len(self.sent_packets) < 4096:  # keep functional echoes bounded
            self.sent_packets.append(cmd.data)


class HostDmaEngine(CommandEngine):
    """Off-cluster DMA and HostDirect writes through the PCIe sink."""

    def __init__(self, sim, mem, host, queue_depth: int) -> None:
        super().__init__(sim, mem, mem.pcie, host, queue_depth, sim.stats.host_log)

    def error_descriptor_addr(self, ctx_id: int) -> int:
        return ERROR_DESCRIPTOR_BASE + 64 * ctx_id

    def _deliver(self, cmd: Command) -> None:
        if cmd.kind == CommandKind.HOST_DIRECT:
            self.sim.stats.bump("host_direct_writes")
        else:
            self.sim.stats.bump("host_dma_writes")
        if cmd.data:
            self.host.write(cmd.dst_addr, cmd.data)
