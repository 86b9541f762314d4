"""Domain types and configuration shared by every unit of the model.

The default `PsPINConfig` is the reference PsPIN configuration:
4 clusters x 8 HPUs at 1 GHz, a 4 MiB 32-bank packet buffer,
a 4 MiB handler memory, 1 MiB of single-cycle L1 per cluster, 512-bit
wide DMA/NIC interconnects and a 32-bit PE interconnect.  Calibration
constants that the hardware documentation only shows graphically
(DMA base latency, word-access latencies, L1 wide-port shape) live here
too so that a config file fully pins a simulation.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from enum import Enum

KIB = 1024
MIB = 1024 * 1024


class PacketKind(str, Enum):
    HEADER = "header"
    PAYLOAD = "payload"


class Outcome(str, Enum):
    OK = "ok"
    PROTECTION_FAULT = "protection_fault"
    WATCHDOG_KILL = "watchdog_kill"


class CommandKind(str, Enum):
    NIC_PUT = "nic_put"
    DMA_TO_HOST = "dma_to_host"
    HOST_DIRECT = "host_direct"


@dataclass(slots=True)
class PsPINConfig:
    # Processing fabric
    num_clusters: int = 4
    hpus_per_cluster: int = 8

    # L2 packet buffer: two ports full duplex, word-interleaved banks
    l2_pkt_buffer_bytes: int = 4 * MIB
    l2_pkt_banks: int = 32
    l2_pkt_bank_word_bits: int = 512

    # L2 handler memory: narrow banks to ease word access from HPUs
    l2_handler_bytes: int = 4 * MIB
    l2_handler_bank_word_bits: int = 64

    # Per-cluster L1 (TCDM) and its fixed partition
    l1_bytes_per_cluster: int = 1 * MIB
    l1_pkt_region_bytes: int = 32 * KIB
    l1_runtime_bytes: int = 8 * KIB
    l1_scratchpad_bytes: int = 984 * KIB
    l1_banks: int = 64
    l1_bank_word_bits: int = 32

    # Interconnect widths (at 1 GHz a width in bits is a rate in Gbit/s)
    wide_link_bits: int = 512
    narrow_link_bits: int = 32

    prog_mem_bytes: int = 32 * KIB

    # Fixed-rate data sinks
    pcie_rate_gbps: int = 512          # effective PCIe 5.0 x16 sink rate
    nic_outbound_rate_gbps: int = 512  # drain rate of the outbound engine

    # Control-path latency constants (cycles)
    her_to_cched_cycles: int = 3       # dispatch pipeline, HER to cluster scheduler
    assign_cycles: int = 1             # cluster scheduler to HPU driver
    runtime_invoke_cycles: int = 7     # read fptr, set up args, jump
    runtime_doorbell_cycles: int = 1   # completion store to the HPU driver
    feedback_arbiter_max_delay: int = 6  # documented worst-case intra-cluster wait
    cluster_arbiter_max_delay: int = 2   # documented worst-case merge wait

    # Cluster DMA calibration: completion = base + one cycle per 64 B beat,
    # fitted to the 12 ns @ 64 B and 26 ns (+1) @ 1024 B measured points.
    dma_base_cycles: int = 11
    dma_beat_bytes: int = 64

    # Word-access latency seen by an HPU (cycles per 32-bit access)
    l1_word_latency: int = 1
    remote_l1_word_latency: int = 15
    l2_word_latency: int = 20

    # External wide port into a cluster L1 (used by NIC outbound / host DMA
    # reads).  Narrow-bank gathering costs a per-burst setup and limits the
    # words gathered per cycle; this is what makes sending from L1 slower
    # than sending from the wide-banked L2.
    l1_ext_setup_cycles: int = 5
    l1_ext_words_per_cycle: int = 4

    # Queue shapes not fixed by the hardware description
    mpq_pool_size: int = 256
    her_queue_depth: int = 64
    cched_fifo_depth: int = 16
    outbound_queue_depth: int = 32

    dispatch_policy: str = "in_order"  # in_order | skip_blocked
    lru_scan_period: int = 64
    fault_reset_cycles: int = 32       # environment reset after fault/kill

    @property
    def total_hpus(self) -> int:
        return self.num_clusters * self.hpus_per_cluster

    @property
    def l2_pkt_beat_bytes(self) -> int:
        return self.l2_pkt_bank_word_bits // 8

    @property
    def wide_beat_bytes(self) -> int:
        return self.wide_link_bits // 8

    def copy(self, **overrides) -> "PsPINConfig":
        return replace(self, **overrides)


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def validate(cfg: PsPINConfig) -> list[str]:
    """Return every invariant violation; an empty list means the config is usable."""
    v: list[str] = []
    if cfg.num_clusters < 1 or cfg.hpus_per_cluster < 1:
        v.append("need at least one cluster and one HPU per cluster")
    for name in (
        "l2_pkt_buffer_bytes",
        "l2_handler_bytes",
        "l1_bytes_per_cluster",
        "l2_pkt_banks",
        "l1_banks",
        "wide_link_bits",
        "narrow_link_bits",
        "prog_mem_bytes",
    ):
        if not _is_pow2(getattr(cfg, name)):
            v.append(f"{name} must be a power of two, got {getattr(cfg, name)}")
    part = cfg.l1_pkt_region_bytes + cfg.l1_runtime_bytes + cfg.l1_scratchpad_bytes
    if part != cfg.l1_bytes_per_cluster:
        v.append(
            f"L1 partition sums to {part} bytes, expected {cfg.l1_bytes_per_cluster}"
        )
    if cfg.dma_beat_bytes * 8 != cfg.wide_link_bits:
        v.append("dma_beat_bytes must match the wide link width")
    if cfg.pcie_rate_gbps <= 0 or cfg.nic_outbound_rate_gbps <= 0:
        v.append("sink rates must be positive")
    if cfg.dispatch_policy not in ("in_order", "skip_blocked"):
        v.append(f"unknown dispatch_policy {cfg.dispatch_policy!r}")
    if cfg.mpq_pool_size < 1:
        v.append("mpq_pool_size must be >= 1")
    if cfg.her_queue_depth < 1 or cfg.cched_fifo_depth < 1:
        v.append("queue depths must be >= 1")
    if cfg.l1_ext_words_per_cycle < 1:
        v.append("l1_ext_words_per_cycle must be >= 1")
    return v


# Config file I/O: a flat INI file with a [pspin] section for the main
# fields and an optional [memory] section for calibration constants.

_MEMORY_KEYS = {
    "dma_base_cycles",
    "dma_beat_bytes",
    "l1_word_latency",
    "remote_l1_word_latency",
    "l2_word_latency",
    "l1_ext_setup_cycles",
    "l1_ext_words_per_cycle",
    "pcie_rate_gbps",
    "nic_outbound_rate_gbps",
}


class ConfigError(ValueError):
    pass


def load_config(path: str) -> PsPINConfig:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    valid = {f.name: f.type for f in fields(PsPINConfig)}
    overrides: dict[str, object] = {}
    for section in parser.sections():
        if section not in ("pspin", "memory"):
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in valid:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            if section == "memory" and key not in _MEMORY_KEYS:
                raise ConfigError(f"key {key!r} does not belong in [memory]")
            overrides[key] = raw if key == "dispatch_policy" else int(raw)
    return PsPINConfig(**overrides)


def save_config(cfg: PsPINConfig, path: str) -> None:
    parser = configparser.ConfigParser()
    parser.add_section("pspin")
    parser.add_section("memory")
    for f in fields(PsPINConfig):
        section = "memory" if f.name in _MEMORY_KEYS else "pspin"
        parser.set(section, f.name, str(getattr(cfg, f.name)))
    with open(path, "w") as fh:
        parser.write(fh)


# Messages, packets, and the scheduler-facing request/response types.


@dataclass(slots=True)
class Packet:
    msg_id: int
    flow: bytes
    size_bytes: int
    kind: PacketKind
    eom: bool
    payload: bytes = b""
    uid: int = -1
    msg_offset: int = 0  # byte offset of this packet within its message

    def payload_view(self) -> bytes:
        if len(self.payload) >= self.size_bytes:
            return self.payload[: self.size_bytes]
        return self.payload + bytes(self.size_bytes - len(self.payload))


@dataclass(slots=True)
class HER:
    """Handler execution request, NIC inbound -> packet scheduler."""

    l2_addr: int
    size_bytes: int
    mpq_id: int
    ctx_id: int
    eom: bool
    kind: PacketKind
    msg_id: int
    uid: int
    alloc_id: int


@dataclass(slots=True)
class Command:
    kind: CommandKind
    src_region: str          # pkt_l1 | pkt_l2 | scratch | hmem | imm
    src_offset: int
    length: int
    dst_addr: int = 0
    cluster: int = -1
    data: bytes = b""
    task_ref: object = None
    issue_time: int = 0


@dataclass(slots=True)
class CompletionNotification:
    mpq_id: int
    her: HER | None
    outcome: Outcome
    task_ref: object = None


@dataclass(slots=True)
class ExecutionContext:
    """Host-installed descriptor binding handlers to a message/flow class.

    `scratchpad_bytes` is carved out of every cluster's L1 scratchpad
    region at install time so that handlers spilled off the home cluster
    still have single-cycle state nearby; the home cluster's slice plays
    the role of the message scratchpad.
    """

    ctx_id: int
    flow_prefix: bytes
    header_handler: object = None      # callable(HandlerApi) or None
    payload_handler: object = None
    completion_handler: object = None
    handler_mem_base: int = 0
    handler_mem_bytes: int = 0
    scratchpad_bytes: int = 0
    bytes_to_l1: int = 64
    mpq_idle_threshold_cycles: int = 100_000
    watchdog_threshold_cycles: int = 0  # 0 disables the watchdog
    error_flag: str = ""
    hmem_image: bytes = b""  # host-written initial handler-memory contents

    def has_any_handler(self) -> bool:
        return any(
            h is not None
            for h in (self.header_handler, self.payload_handler, self.completion_handler)
        )


def validate_contexts(cfg: PsPINConfig, contexts: list[ExecutionContext]) -> list[str]:
    """Check region fit and pairwise isolation of installed contexts."""
    v: list[str] = []
    spans: list[tuple[int, int, int]] = []
    scratch_total = 0
    for ctx in contexts:
        if not ctx.has_any_handler():
            v.append(f"ctx {ctx.ctx_id}: at least one handler binding required")
        if ctx.handler_mem_base < 0 or (
            ctx.handler_mem_base + ctx.handler_mem_bytes > cfg.l2_handler_bytes
        ):
            v.append(f"ctx {ctx.ctx_id}: handler memory region outside L2")
        if ctx.bytes_to_l1 > cfg.l1_pkt_region_bytes:
            v.append(f"ctx {ctx.ctx_id}: bytes_to_l1 exceeds the L1 packet region")
        spans.append(
            (ctx.handler_mem_base, ctx.handler_mem_base + ctx.handler_mem_bytes, ctx.ctx_id)
        )
        scratch_total += ctx.scratchpad_bytes
    if scratch_total > cfg.l1_scratchpad_bytes:
        v.append("combined context scratchpads exceed the per-cluster scratchpad region")
    spans.sort()
    for (a0, a1, ida), (b0, b1, idb) in zip(spans, spans[1:]):
        if a1 > a0 and b1 > b0 and a1 > b0:
            v.append(f"ctx {ida} and ctx {idb}: handler memory regions overlap")
    return v
