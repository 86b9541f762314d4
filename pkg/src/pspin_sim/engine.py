"""Deterministic discrete-event core.

The engine runs a single-threaded event loop over a 1 GHz clock
(1 cycle == 1 ns), so every latency in the model is an integer cycle
count.  Events firing at the same cycle run in insertion order, which
removes all scheduling nondeterminism: a fixed (config, trace, seed)
triple replays the exact same event sequence.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass


class SimulationError(RuntimeError):
    """Programming error inside the simulation (e.g. scheduling in the past)."""


@dataclass(slots=True)
class PacketRecord:
    """Per-packet latency record, one per HER that enters the scheduler.

    All timestamps are cycle numbers; -1 marks a stage the packet never
    reached (e.g. dropped by a stale-queue reset).
    """

    uid: int
    msg_id: int
    mpq_id: int
    size_bytes: int
    kind: str
    t_her: int = -1
    t_dispatch: int = -1
    t_cched: int = -1
    t_dma_start: int = -1
    t_dma_end: int = -1
    t_assign: int = -1
    t_invoke_end: int = -1
    t_handler_end: int = -1
    t_doorbell: int = -1
    t_notif_sent: int = -1
    t_notif_recv: int = -1
    cluster: int = -1
    hpu: int = -1
    outcome: str = ""

    @property
    def latency(self) -> int:
        """HER arrival to completion notification, in cycles."""
        return self.t_notif_recv - self.t_her


class StatsRecorder:
    """Global statistics sink shared by every unit in one simulation."""

    def __init__(self) -> None:
        self.counters: dict[str, int] = {}
        self.packet_records: list[PacketRecord] = []
        self.task_records: list[PacketRecord] = []  # completion tasks, no packet
        self.hpu_busy: dict[tuple[int, int], int] = {}
        self.hpus_touched: set[tuple[int, int]] = set()
        self.link_bytes: dict[str, int] = {}
        self.bank_conflicts: dict[str, int] = {}
        self.completion_log: list[tuple[int, int]] = []  # (cycle, payload_bits)
        self.tx_log: list[tuple[int, int]] = []  # (cycle, bits) drained at NIC outbound
        self.host_log: list[tuple[int, int]] = []  # (cycle, bits) drained over PCIe
        self.first_injection: int | None = None
        self.last_completion: int | None = None
        self._concurrency = 0
        self.peak_hpu_concurrency = 0

    def bump(self, name: str, n: int = 1) -> None:
        self.counters[name] = self.counters.get(name, 0) + n

    def add_link_bytes(self, link: str, n: int) -> None:
        self.link_bytes[link] = self.link_bytes.get(link, 0) + n

    def add_bank_conflicts(self, mem: str, n: int) -> None:
        if n:
            self.bank_conflicts[mem] = self.bank_conflicts.get(mem, 0) + n

    def hpu_acquired(self, cluster: int, hpu: int) -> None:
        self.hpus_touched.add((cluster, hpu))
        self._concurrency += 1
        if self._concurrency > self.peak_hpu_concurrency:
            self.peak_hpu_concurrency = self._concurrency

    def hpu_released(self) -> None:
        self._concurrency -= 1

    def add_busy(self, cluster: int, hpu: int, cycles: int) -> None:
        key = (cluster, hpu)
        self.hpu_busy[key] = self.hpu_busy.get(key, 0) + cycles

    def note_completion(self, cycle: int, payload_bits: int) -> None:
        self.completion_log.append((cycle, payload_bits))
        if self.last_completion is None or cycle > self.last_completion:
            self.last_completion = cycle

    @property
    def hpus_used(self) -> int:
        return len(self.hpus_touched)

    def goodput_gbps(self) -> float:
        """Payload bits over first-injection..last-completion, in Gbit/s."""
        if self.first_injection is None or self.last_completion is None:
            return 0.0
        span = self.last_completion - self.first_injection
        if span <= 0:
            return 0.0
        total_bits = sum(bits for _, bits in self.completion_log)
        return total_bits / span  # bits per ns == Gbit/s

    def drained_gbps(self, log: list[tuple[int, int]]) -> float:
        if not log or self.first_injection is None:
            return 0.0
        span = log[-1][0] - self.first_injection
        if span <= 0:
            return 0.0
        return sum(bits for _, bits in log) / span

    def throughput_series(self, window: int = 1000) -> list[tuple[int, float]]:
        """Windowed goodput series: (window start cycle, Gbit/s)."""
        buckets: dict[int, int] = {}
        for cycle, bits in self.completion_log:
            buckets[cycle // window] = buckets.get(cycle // window, 0) + bits
        return [(w * window, bits / window) for w, bits in sorted(buckets.items())]


@dataclass(slots=True, frozen=True)
class StatsSnapshot:
    """Immutable copy of the recorder state returned by Simulator.run."""

    now: int
    counters: tuple[tuple[str, int], ...]
    hpu_busy: tuple[tuple[tuple[int, int], int], ...]
    link_bytes: tuple[tuple[str, int], ...]
    bank_conflicts: tuple[tuple[str, int], ...]
    hpus_used: int
    peak_hpu_concurrency: int
    goodput_gbps: float
    packet_latencies: tuple[int, ...]


class Simulator:
    """Stable-priority-queue event loop.

    Equal-time events fire in insertion order (the heap key includes a
    per-run sequence number), giving a total order over all events.
    """

    def __init__(self, stats: StatsRecorder | None = None) -> None:
        self._now = 0
        self._seq = 0
        self._heap: list[tuple[int, int, object, tuple]] = []
        self.stats = stats if stats is not None else StatsRecorder()

    @property
    def now(self) -> int:
        return self._now

    def schedule(self, at: int, action, *args) -> int:
        if at < self._now:
            raise SimulationError(
                f"schedule at {at} is in the past (now={self._now})"
            )
        seq = self._seq
        self._seq += 1
        heapq.heappush(self._heap, (at, seq, action, args))
        return seq

    def schedule_in(self, delay: int, action, *args) -> int:
        return self.schedule(self._now + delay, action, *args)

    def pending(self) -> int:
        return len(self._heap)

    def run(self, until: int | None = None) -> StatsSnapshot:
        """Process events until quiescence (empty queue) or `until` cycles."""
        heap = self._heap
        while heap:
            at, _seq, action, args = heap[0]
            if until is not None and at > until:
                self._now = until
                break
            heapq.heappop(heap)
            self._now = at
            action(*args)
        return self.snapshot()

    def snapshot(self) -> StatsSnapshot:
        s = self.stats
        return StatsSnapshot(
            now=self._now,
            counters=tuple(sorted(s.counters.items())),
            hpu_busy=tuple(sorted(s.hpu_busy.items())),
            link_bytes=tuple(sorted(s.link_bytes.items())),
            bank_conflicts=tuple(sorted(s.bank_conflicts.items())),
            hpus_used=s.hpus_used,
            peak_hpu_concurrency=s.peak_hpu_concurrency,
            goodput_gbps=s.goodput_gbps(),
            packet_latencies=tuple(
                r.latency for r in s.packet_records if r.t_notif_recv >= 0
            ),
        )
