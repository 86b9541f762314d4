"""Handler execution environment.

Handlers are host-native functions driven through `HandlerApi`, which is
the only window a handler has onto simulator state (packet bytes, the
per-cluster scratchpad slice of its context, the context's handler
memory, and the command units).  Every access is bounds-checked against
exactly those regions and charged in cycles, so a handler's busy time is
the 8-cycle runtime envelope (7 to invoke, 1 for the doorbell store)
plus its explicit compute charges plus its memory stalls, exactly.

The 4-step runtime loop (read the function pointer, prepare arguments,
call, write the doorbell) is folded into the invoke/doorbell charges.
Memory-protection violations and watchdog expiry abort the handler,
record a distinct outcome, cost a fixed environment reset, and report
the error to the host through a HostDirect write into the context
descriptor; the packet's resources are still released so the message
keeps flowing.
"""

from __future__ import annotations

import struct

import numpy as np

from .config import Command, CommandKind, Outcome, PsPINConfig
from .scheduler import Task


class MemoryFault(Exception):
    """Access outside the task's permitted regions."""

    def __init__(self, region: str, offset: int, length: int) -> None:
        super().__init__(f"fault: {region}[{offset}:{offset + length}]")
        self.region = region
        self.offset = offset
        self.length = length


class WatchdogExceeded(Exception):
    pass


class HandlerApi:
    """Capability handle passed to a running handler."""

    __slots__ = (
        "env",
        "task",
        "cluster_id",
        "cursor",
        "_body_start",
        "_deadline",
        "_scratch",
        "_hmem",
        "_l1",
    )

    def __init__(self, env: "RuntimeEnv", task: Task, cluster_id: int, start: int) -> None:
        self.env = env
        self.task = task
        self.cluster_id = cluster_id
        self.cursor = start
        self._body_start = start
        w = task.ctx.watchdog_threshold_cycles
        self._deadline = start + w if w > 0 else None
        self._scratch = env.scratch.get((task.ctx.ctx_id, cluster_id))
        self._hmem = env.hmem.get(task.ctx.ctx_id)
        self._l1 = env.mem.l1[cluster_id]

    # Metadata

    @property
    def msg_id(self) -> int:
        return self.task.msg_id

    @property
    def pkt_size(self) -> int:
        return 0 if self.task.her is None else self.task.her.size_bytes

    @property
    def staged_len(self) -> int:
        return 0 if self.task.staged is None else len(self.task.staged)

    @property
    def msg_offset(self) -> int:
        return 0 if self.task.packet is None else self.task.packet.msg_offset

    @property
    def eom(self) -> bool:
        return False if self.task.her is None else self.task.her.eom

    @property
    def scratchpad_len(self) -> int:
        return 0 if self._scratch is None else len(self._scratch)

    @property
    def num_clusters(self) -> int:
        return self.env.cfg.num_clusters

    @property
    def handler_mem_len(self) -> int:
        return 0 if self._hmem is None else len(self._hmem)

    # Charging

    def charge(self, cycles: int) -> None:
        """Account `cycles` of straight-line compute."""
        if cycles < 0:
            raise ValueError("negative charge")
        self.cursor += cycles
        self._check_watchdog()

    def _check_watchdog(self) -> None:
        if self._deadline is not None and self.cursor > self._deadline:
            self.cursor = self._deadline
            raise WatchdogExceeded()

    def _charge_l1(self, addr: int, words: int) -> None:
        stall = self._l1.word_access_stall(self.cursor, addr)
        self.cursor += words * self.env.cfg.l1_word_latency + stall
        self._check_watchdog()

    def _charge_l2(self, words: int) -> None:
        self.cursor += words * self.env.cfg.l2_word_latency
        self._check_watchdog()

    def _charge_remote_l1(self, words: int) -> None:
        self.cursor += words * self.env.cfg.remote_l1_word_latency
        self._check_watchdog()

    # Packet view: the staged L1 copy when bytes_to_l1 > 0, otherwise
    # word reads against the packet's L2 buffer location.

    def _staged(self, off: int, length: int) -> bytearray:
        staged = self.task.staged
        if staged is None or off < 0 or off + length > len(staged):
            raise MemoryFault("packet", off, length)
        return staged

    def pkt_read_u32(self, off: int) -> int:
        if self.task.staged is not None:
            buf = self._staged(off, 4)
            self._charge_l1(self.task.l1_addr + off, 1)
            return struct.unpack_from("<I", buf, off)[0]
        if self.task.packet is None or off < 0 or off + 4 > self.pkt_size:
            raise MemoryFault("packet", off, 4)
        self._charge_l2(1)
        return struct.unpack_from("<I", self.task.packet.payload_view(), off)[0]

    def pkt_write_u32(self, off: int, value: int) -> None:
        buf = self._staged(off, 4)  # packets are written through the L1 copy
        self._charge_l1(self.task.l1_addr + off, 1)
        struct.pack_into("<I", buf, off, value & 0xFFFFFFFF)

    def pkt_read_u16(self, off: int) -> int:
        buf = self._staged(off, 2)
        self._charge_l1(self.task.l1_addr + off, 1)
        return struct.unpack_from("<H", buf, off)[0]

    def pkt_write_u16(self, off: int, value: int) -> None:
        buf = self._staged(off, 2)
        self._charge_l1(self.task.l1_addr + off, 1)
        struct.pack_into("<H", buf, off, value & 0xFFFF)

    def pkt_read_bytes(self, off: int, length: int) -> bytes:
        buf = self._staged(off, length)
        self._charge_l1(self.task.l1_addr + off, (length + 3) // 4)
        return bytes(buf[off : off + length])

    def pkt_read_words(self, off: int, nwords: int) -> np.ndarray:
        """Word-granularity bulk read of the staged packet (one cycle each)."""
        buf = self._staged(off, nwords * 4)
        self._charge_l1(self.task.l1_addr + off, nwords)
        return np.frombuffer(bytes(buf[off : off + nwords * 4]), dtype=np.uint32)

    # Scratchpad: this context's slice of a cluster L1.  Remote slices
    # (other clusters) are reachable at the remote-L1 word latency.

    def _scratch_buf(self, cluster: int | None) -> bytearray:
        if cluster is None or cluster == self.cluster_id:
            buf = self._scratch
        else:
            buf = self.env.scratch.get((self.task.ctx.ctx_id, cluster))
        if buf is None:
            raise MemoryFault("scratchpad", 0, 0)
        return buf

    def scratch_read_u32(self, off: int, cluster: int | None = None) -> int:
        buf = self._scratch_buf(cluster)
        if off < 0 or off + 4 > len(buf):
            raise MemoryFault("scratchpad", off, 4)
        if cluster is None or cluster == self.cluster_id:
            self._charge_l1(off, 1)
        else:
            self._charge_remote_l1(1)
        return struct.unpack_from("<I", buf, off)[0]

    def scratch_write_u32(self, off: int, value: int, cluster: int | None = None) -> None:
        buf = self._scratch_buf(cluster)
        if off < 0 or off + 4 > len(buf):
            raise MemoryFault("scratchpad", off, 4)
        if cluster is None or cluster == self.cluster_id:
            self._charge_l1(off, 1)
        else:
            self._charge_remote_l1(1)
        struct.pack_into("<I", buf, off, value & 0xFFFFFFFF)

    def scratch_amo_add(self, off: int, value: int) -> int:
        """Single-cycle atomic fetch-add on a local scratchpad word."""
        buf = self._scratch_buf(None)
        if off < 0 or off + 4 > len(buf):
            raise MemoryFault("scratchpad", off, 4)
        self.charge(1)
        old = struct.unpack_from("<I", buf, off)[0]
        struct.pack_into("<I", buf, off, (old + value) & 0xFFFFFFFF)
        return old

    def scratch_add_words(self, off: int, words: np.ndarray) -> None:
        """Vector of single-cycle atomic adds into consecutive words."""
        buf = self._scratch_buf(None)
        n = len(words)
        if off < 0 or off + 4 * n > len(buf):
            raise MemoryFault("scratchpad", off, 4 * n)
        self.charge(n)
        view = np.frombuffer(buf, dtype=np.uint32, count=n, offset=off)
        result = (view.astype(np.uint64) + words.astype(np.uint64)) & 0xFFFFFFFF
        buf[off : off + 4 * n] = result.astype(np.uint32).tobytes()

    def scratch_add_at(self, base: int, indices: np.ndarray, count_words: int) -> None:
        """Scatter-increment (histogram style), one cycle per element."""
        buf = self._scratch_buf(None)
        if base < 0 or base + 4 * count_words > len(buf):
            raise MemoryFault("scratchpad", base, 4 * count_words)
        if len(indices) and (indices.max() >= count_words or indices.min() < 0):
            raise MemoryFault("scratchpad", base, 4 * count_words)
        self.charge(len(indices))
        view = np.frombuffer(buf, dtype=np.uint32, count=count_words, offset=base).copy()
        np.add.at(view, indices, 1)
        buf[base : base + 4 * count_words] = view.tobytes()

    def scratch_write_words(self, off: int, words: np.ndarray) -> None:
        buf = self._scratch_buf(None)
        n = len(words)
        if off < 0 or off + 4 * n > len(buf):
            raise MemoryFault("scratchpad", off, 4 * n)
        self._charge_l1(off, n)
        buf[off : off + 4 * n] = words.astype(np.uint32).tobytes()

    def scratch_read_words(self, off: int, nwords: int, cluster: int | None = None) -> np.ndarray:
        buf = self._scratch_buf(cluster)
        if off < 0 or off + 4 * nwords > len(buf):
            raise MemoryFault("scratchpad", off, 4 * nwords)
        if cluster is None or cluster == self.cluster_id:
            self._charge_l1(off, nwords)
        else:
            self._charge_remote_l1(nwords)
        return np.frombuffer(bytes(buf[off : off + 4 * nwords]), dtype=np.uint32)

    # Handler memory (L2): word accesses serialize on the core, so bulk
    # reads cost the full per-word latency each.

    def _hmem_buf(self, off: int, length: int) -> bytearray:
        buf = self._hmem
        if buf is None or off < 0 or off + length > len(buf):
            raise MemoryFault("handler_mem", off, length)
        return buf

    def hmem_read_u32(self, off: int) -> int:
        buf = self._hmem_buf(off, 4)
        self._charge_l2(1)
        return struct.unpack_from("<I", buf, off)[0]

    def hmem_write_u32(self, off: int, value: int) -> None:
        buf = self._hmem_buf(off, 4)
        self._charge_l2(1)
        struct.pack_into("<I", buf, off, value & 0xFFFFFFFF)

    def hmem_read_words(self, off: int, nwords: int) -> np.ndarray:
        buf = self._hmem_buf(off, 4 * nwords)
        self._charge_l2(nwords)
        return np.frombuffer(bytes(buf[off : off + 4 * nwords]), dtype=np.uint32)

    def hmem_amo_add(self, off: int, value: int) -> int:
        """Atomic fetch-add on a handler-memory word (posted, single cycle)."""
        buf = self._hmem_buf(off, 4)
        self.charge(1)
        old = struct.unpack_from("<I", buf, off)[0]
        struct.pack_into("<I", buf, off, (old + value) & 0xFFFFFFFF)
        return old

    # Commands.  Issuing costs 7 cycles on the core; the per-cluster
    # command arbiter accepts one command per cycle and the engines
    # respond when the data has fully left PsPIN.

    ISSUE_CYCLES = 7

    def _src_snapshot(self, region: str, off: int, length: int) -> bytes:
        task = self.task
        if region == "pkt_l1":
            buf = self._staged(off, length)
            return bytes(buf[off : off + length])
        if region == "pkt_l2":
            if task.packet is None or off < 0 or off + length > self.pkt_size:
                raise MemoryFault("packet", off, length)
            return task.packet.payload_view()[off : off + length]
        if region == "scratch":
            buf = self._scratch_buf(None)
            if off < 0 or off + length > len(buf):
                raise MemoryFault("scratchpad", off, length)
            return bytes(buf[off : off + length])
        if region == "hmem":
            buf = self._hmem_buf(off, length)
            return bytes(buf[off : off + length])
        raise MemoryFault(region, off, length)

    def _issue(self, cmd: Command) -> None:
        engine = (
            self.env.outbound if cmd.kind == CommandKind.NIC_PUT else self.env.hostdma
        )
        # A full outbound queue blocks the handler until a slot drains.
        free_at = engine.earliest_slot(self.cursor)
        if free_at > self.cursor:
            self.cursor = free_at
            self._check_watchdog()
        grant = self.env.clusters[self.cluster_id].command_accept_slot(self.cursor + 6)
        self.cursor = max(self.cursor + self.ISSUE_CYCLES, grant + 1)
        self._check_watchdog()
        cmd.issue_time = grant + 1
        cmd.task_ref = self.task
        cmd.cluster = self.cluster_id
        self.task.in_flight_cmds += 1
        self.env.sim.schedule(grant + 1, engine.submit, cmd)

    def put_packet(self, from_l1: bool, off: int = 0, length: int | None = None) -> None:
        """NIC put: send packet bytes back to the network."""
        length = self.pkt_size if length is None else length
        region = "pkt_l1" if from_l1 else "pkt_l2"
        data = self._src_snapshot(region, off, length)
        addr = (self.task.l1_addr if from_l1 else self.task.her.l2_addr) + off
        self._issue(
            Command(CommandKind.NIC_PUT, region, addr, length, data=data)
        )

    def put_scratch(self, off: int, length: int) -> None:
        data = self._src_snapshot("scratch", off, length)
        self._issue(Command(CommandKind.NIC_PUT, "scratch", off, length, data=data))

    def dma_to_host(self, region: str, off: int, length: int, host_addr: int) -> None:
        """Off-cluster DMA write of a readable region to host memory."""
        data = self._src_snapshot(region, off, length)
        addr = (
            self.task.l1_addr + off
            if region == "pkt_l1"
            else self.task.her.l2_addr + off
            if region == "pkt_l2"
            else off
        )
        self._issue(
            Command(CommandKind.DMA_TO_HOST, region, addr, length, dst_addr=host_addr, data=data)
        )

    def host_direct(self, host_addr: int, data: bytes) -> None:
        """Write up to 32 B of immediate data straight to host memory."""
        if len(data) > 32:
            raise MemoryFault("imm", 0, len(data))
        self._issue(
            Command(
                CommandKind.HOST_DIRECT, "imm", 0, len(data), dst_addr=host_addr, data=bytes(data)
            )
        )


class RuntimeEnv:
    """Shared handler-execution plumbing: content arrays and command units."""

    def __init__(self, sim, cfg: PsPINConfig, mem, clusters, outbound, hostdma) -> None:
        self.sim = sim
        self.cfg = cfg
        self.mem = mem
        self.clusters = clusters
        self.outbound = outbound
        self.hostdma = hostdma
        self.scratch: dict[tuple[int, int], bytearray] = {}
        self.hmem: dict[int, bytearray] = {}

    def install_context(self, ctx) -> None:
        if ctx.handler_mem_bytes > 0:
            buf = bytearray(ctx.handler_mem_bytes)
            if ctx.hmem_image:
                buf[: len(ctx.hmem_image)] = ctx.hmem_image
            self.hmem[ctx.ctx_id] = buf
        if ctx.scratchpad_bytes > 0:
            for c in range(self.cfg.num_clusters):
                self.scratch[(ctx.ctx_id, c)] = bytearray(ctx.scratchpad_bytes)

    def execute(self, hpu, task: Task) -> None:
        """Run the 4-step runtime loop for one task on one HPU."""
        sim = self.sim
        start = sim.now
        body_start = start + self.cfg.runtime_invoke_cycles
        task.record.t_invoke_end = body_start
        api = HandlerApi(self, task, hpu.cluster.cluster_id, body_start)
        reset = 0
        try:
            task.fn(api)
        except MemoryFault:
            task.outcome = Outcome.PROTECTION_FAULT
            reset = self.cfg.fault_reset_cycles
            self._report_error(api, task)
        except WatchdogExceeded:
            task.outcome = Outcome.WATCHDOG_KILL
            reset = self.cfg.fault_reset_cycles
            self._report_error(api, task)
        if task.outcome is not Outcome.OK:
            task.record.outcome = task.outcome.value
        body_end = api.cursor
        task.record.t_handler_end = body_end
        doorbell = body_end + self.cfg.runtime_doorbell_cycles
        sim.schedule(doorbell, hpu.doorbell, task, reset)

    def _report_error(self, api: HandlerApi, task: Task) -> None:
        """HostDirect write of the error condition into the descriptor."""
        payload = task.outcome.value.encode()[:32]
        cmd = Command(
            CommandKind.HOST_DIRECT,
            "imm",
            0,
            len(payload),
            dst_addr=self.hostdma.error_descriptor_addr(task.ctx.ctx_id),
            data=payload,
        )
        cmd.cluster = api.cluster_id
        cmd.task_ref = None  # driver-issued: does not gate the notification
        self.sim.schedule(api.cursor + 1, self.hostdma.submit, cmd)
