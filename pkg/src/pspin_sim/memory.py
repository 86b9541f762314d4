"""Timed model of memories, interconnects, DMA engines, and data sinks.

Every wide port moves one 512-bit beat per cycle, so at 1 GHz a port is
a 512 Gbit/s resource.  Ports are modeled as FIFO reservation timelines:
a requester asks for `n` beats at cycle `t` and receives the interval it
occupies.  Word-interleaved banks add a second constraint on top of the
port timeline; two requesters touching the same bank in the same cycle
serialize in arrival order (deterministically).

The packet buffer has two full-duplex ports.  Port 1 faces the NIC-host
interconnect: only the inbound engine writes through it, while the
outbound engine and the off-cluster DMA share its read direction (hence
256 Gbit/s each under full dual load).  Port 2 faces the cluster DMA and
PE interconnects and serves the L2-to-L1 staging reads.

Cluster L1 is narrow-banked (64 x 32 bit).  The cluster-local DMA engine
has a tightly coupled wide interface (16 words/cycle), but external wide
readers (NIC outbound, off-cluster DMA) must gather 32-bit words through
an adapter with a per-burst setup cost and a limited gather width.  That
asymmetry is what makes "send from L1" measurably slower than "send from
L2" for small packets.
"""

from __future__ import annotations

from fractions import Fraction
from math import ceil

from .config import PsPINConfig
from .engine import StatsRecorder


class SerialPort:
    """One beat per cycle, reservations served in request order."""

    __slots__ = ("name", "beat_bytes", "next_free", "stats")

    def __init__(self, name: str, beat_bytes: int, stats: StatsRecorder) -> None:
        self.name = name
        self.beat_bytes = beat_bytes
        self.next_free = 0
        self.stats = stats

    def reserve_bytes(self, at: int, nbytes: int) -> tuple[int, int]:
        beats = max(1, ceil(nbytes / self.beat_bytes))
        start = at if at > self.next_free else self.next_free
        end = start + beats
        self.next_free = end
        self.stats.add_link_bytes(self.name, nbytes)
        return start, end


class BankedPort(SerialPort):
    """Serial port over a word-interleaved multi-bank memory.

    Beat `i` of a burst starting at word `w` lands in bank `(w+i) % n`.
    A beat stalls while its bank is still serving an earlier overlapping
    burst from a requester on the same port direction, and every stall
    cycle is counted as a bank conflict.
    """

    __slots__ = ("mem_name", "nbanks", "bank_next")

    def __init__(
        self,
        name: str,
        mem_name: str,
        beat_bytes: int,
        nbanks: int,
        bank_next: dict[int, int],
        stats: StatsRecorder,
    ) -> None:
        super().__init__(name, beat_bytes, stats)
        self.mem_name = mem_name
        self.nbanks = nbanks
        self.bank_next = bank_next  # one map per port direction

    def reserve(self, at: int, addr: int, nbytes: int) -> tuple[int, int]:
        beats = max(1, ceil(nbytes / self.beat_bytes))
        word0 = addr // self.beat_bytes
        t = at if at > self.next_free else self.next_free
        start = t
        conflicts = 0
        bank_next = self.bank_next
        for i in range(beats):
            bank = (word0 + i) % self.nbanks
            b = bank_next.get(bank, 0)
            if b > t:
                conflicts += b - t
                t = b
            bank_next[bank] = t + 1
            t += 1
        self.next_free = t
        self.stats.add_link_bytes(self.name, nbytes)
        self.stats.add_bank_conflicts(self.mem_name, conflicts)
        return start, t


class BurstAdapter:
    """Non-pipelined wide access into narrow banks (per-burst setup cost)."""

    __slots__ = ("name", "setup", "words_per_cycle", "next_free", "stats")

    def __init__(
        self, name: str, setup: int, words_per_cycle: int, stats: StatsRecorder
    ) -> None:
        self.name = name
        self.setup = setup
        self.words_per_cycle = words_per_cycle
        self.next_free = 0
        self.stats = stats

    def reserve_bytes(self, at: int, nbytes: int) -> tuple[int, int]:
        words = max(1, ceil(nbytes / 4))
        start = at if at > self.next_free else self.next_free
        end = start + self.setup + ceil(words / self.words_per_cycle)
        self.next_free = end
        self.stats.add_link_bytes(self.name, nbytes)
        return start, end


class RateSink:
    """Fixed-rate data sink (PCIe model, NIC outbound drain).

    Exact rational accounting keeps sub-cycle rates deterministic; the
    returned completion is rounded up to a whole cycle.
    """

    __slots__ = ("name", "bits_per_cycle", "next_free", "stats")

    def __init__(self, name: str, rate_gbps: int, stats: StatsRecorder) -> None:
        self.name = name
        self.bits_per_cycle = Fraction(rate_gbps)  # Gbit/s == bits per ns
        self.next_free = Fraction(0)
        self.stats = stats

    def drain(self, at: int, nbytes: int) -> int:
        start = max(Fraction(at), self.next_free)
        end = start + Fraction(nbytes * 8) / self.bits_per_cycle
        self.next_free = end
        self.stats.add_link_bytes(self.name, nbytes)
        return int(ceil(end))


class ClusterL1:
    """Timed view of one cluster's TCDM: staging port, external adapter,
    and an approximate conflict model for HPU word accesses that land in
    a bank range currently swept by an active wide burst."""

    __slots__ = ("cluster_id", "staging", "ext_read", "ext_write", "_bursts", "stats", "nbanks")

    def __init__(self, cfg: PsPINConfig, cluster_id: int, stats: StatsRecorder) -> None:
        self.cluster_id = cluster_id
        self.nbanks = cfg.l1_banks
        self.staging = SerialPort(f"l1_{cluster_id}_staging", cfg.wide_beat_bytes, stats)
        self.ext_read = BurstAdapter(
            f"l1_{cluster_id}_ext_read",
            cfg.l1_ext_setup_cycles,
            cfg.l1_ext_words_per_cycle,
            stats,
        )
        self.ext_write = BurstAdapter(
            f"l1_{cluster_id}_ext_write",
            cfg.l1_ext_setup_cycles,
            cfg.l1_ext_words_per_cycle,
            stats,
        )
        self._bursts: list[tuple[int, int, int, int]] = []  # (start, end, bank0, nbanks)
        self.stats = stats

    def note_burst(self, start: int, end: int, addr: int, nbytes: int) -> None:
        bank0 = (addr // 4) % self.nbanks
        span = min(self.nbanks, max(1, ceil(nbytes / 4)))
        bursts = self._bursts
        bursts.append((start, end, bank0, span))
        if len(bursts) > 32:
            del bursts[: len(bursts) - 32]

    def word_access_stall(self, at: int, addr: int) -> int:
        """Extra cycles an HPU word access pays when it collides with a
        wide burst sweeping its bank; at most one cycle per collision."""
        bank = (addr // 4) % self.nbanks
        for start, end, bank0, span in reversed(self._bursts):
            if start <= at < end:
                if span >= self.nbanks or (bank - bank0) % self.nbanks < span:
                    self.stats.add_bank_conflicts(f"l1_{self.cluster_id}", 1)
                    return 1
            elif end <= at - 64:
                break
        return 0


class MemorySystem:
    """All timed memory resources of one simulation instance."""

    def __init__(self, cfg: PsPINConfig, stats: StatsRecorder) -> None:
        self.cfg = cfg
        self.stats = stats
        beat = cfg.l2_pkt_beat_bytes

        # L2 packet buffer: two ports, each full duplex, so the four
        # direction streams never conflict with one another; banks
        # serialize only requesters sharing a port direction (e.g. the
        # NIC outbound and the off-cluster DMA on the host-side reads).
        self.l2pkt_nic_write = BankedPort(
            "l2pkt_nic_write", "l2_pkt", beat, cfg.l2_pkt_banks, {}, stats
        )
        self.l2pkt_host_read = BankedPort(
            "l2pkt_host_read", "l2_pkt", beat, cfg.l2_pkt_banks, {}, stats
        )
        self.l2pkt_cluster_read = BankedPort(
            "l2pkt_cluster_read", "l2_pkt", beat, cfg.l2_pkt_banks, {}, stats
        )
        self.l2pkt_cluster_write = BankedPort(
            "l2pkt_cluster_write", "l2_pkt", beat, cfg.l2_pkt_banks, {}, stats
        )

        # L2 handler memory: 512 Gbit/s per port full duplex.  Its narrow
        # 64-bit banks exist to dodge word-access conflicts, so the wide
        # ports are modeled as plain bandwidth caps.
        self.l2hnd_read = SerialPort("l2hnd_read", beat, stats)
        self.l2hnd_write = SerialPort("l2hnd_write", beat, stats)

        self.l1 = [ClusterL1(cfg, c, stats) for c in range(cfg.num_clusters)]

        self.pcie = RateSink("pcie", cfg.pcie_rate_gbps, stats)
        self.nic_outbound = RateSink("nic_outbound", cfg.nic_outbound_rate_gbps, stats)

    # Flow 1 ingress: NIC inbound writes a packet into the L2 buffer.
    def ingress_write(self, at: int, addr: int, nbytes: int) -> tuple[int, int]:
        return self.l2pkt_nic_write.reserve(at, addr, nbytes)

    # Flow 1 egress: cluster DMA stages packet bytes from L2 into L1.
    def stage_to_l1(
        self, at: int, cluster: int, l2_addr: int, l1_addr: int, nbytes: int
    ) -> tuple[int, int]:
        """Returns (start, completion) of the staging transfer."""
        r_start, r_end = self.l2pkt_cluster_read.reserve(at, l2_addr, nbytes)
        w_start, w_end = self.l1[cluster].staging.reserve_bytes(at, nbytes)
        self.l1[cluster].note_burst(w_start, w_end, l1_addr, nbytes)
        end = max(r_end, w_end) + self.cfg.dma_base_cycles
        return r_start, end

    # Flows 2/3: wide read of command source data.
    def command_read(
        self, at: int, region: str, cluster: int, addr: int, nbytes: int
    ) -> int:
        """Read `nbytes` for the NIC outbound or off-cluster DMA engine;
        returns the cycle the data has fully left the memory."""
        if region == "pkt_l2":
            _, end = self.l2pkt_host_read.reserve(at, addr, nbytes)
        elif region == "hmem":
            _, end = self.l2hnd_read.reserve_bytes(at, nbytes)
        elif region in ("pkt_l1", "scratch"):
            l1 = self.l1[cluster]
            start, end = l1.ext_read.reserve_bytes(at, nbytes)
            l1.note_burst(start, end, addr, nbytes)
        elif region == "imm":
            end = at  # immediate data travels inside the command
        else:
            raise ValueError(f"unreadable command source region {region!r}")
        return end

    # HPU-visible word access cost (32-bit, one outstanding per core).
    def word_access_cycles(self, at: int, region: str, local: bool, cluster: int, addr: int) -> int:
        cfg = self.cfg
        if region in ("pkt_l1", "scratch", "l1"):
            if local:
                return cfg.l1_word_latency + self.l1[cluster].word_access_stall(at, addr)
            return cfg.remote_l1_word_latency
        return cfg.l2_word_latency
