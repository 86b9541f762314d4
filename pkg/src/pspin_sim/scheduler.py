"""Packet scheduler: MPQ engine, task dispatcher, and stale-queue monitor.

The MPQ engine enforces the per-message ordering contract: the header
task runs alone first, payload tasks flow afterwards in FIFO order, and
the completion task runs exactly once, after the end-of-message packet
has arrived and every other task of the message has completed.

The task dispatcher forwards one released task per cycle.  It tries the
message's home cluster first and falls back to the least loaded cluster
that can accept the packet bytes; when no cluster can accept, it blocks
(strictly in order by default), which backpressures the inbound engine
through the HER queue.

A pseudo-LRU list over active MPQs detects messages that stopped
arriving: the least recently touched queue is reset once it exceeds its
context's idle threshold, its pending packets are dropped and freed, and
the host is signaled through the context descriptor.
"""

from __future__ import annotations

from collections import OrderedDict, deque
from enum import Enum

from .config import (
    CompletionNotification,
    ExecutionContext,
    HER,
    Outcome,
    Packet,
    PacketKind,
    PsPINConfig,
)
from .engine import PacketRecord, Simulator


class Phase(Enum):
    IDLE = "idle"
    AWAITING_HEADER = "awaiting_header"
    HEADER_RUNNING = "header_running"
    FLOWING = "flowing"
    DRAINING = "draining"
    COMPLETING = "completing"


class Task:
    __slots__ = (
        "mpq_id",
        "generation",
        "ctx",
        "msg_id",
        "home",
        "kind",
        "her",
        "packet",
        "record",
        "fn",
        "bytes_to_l1",
        "cluster",
        "l1_addr",
        "l1_alloc_id",
        "staged",
        "in_flight_cmds",
        "awaiting_responses",
        "outcome",
        "hpu",
    )

    def __init__(self, mpq, kind: str, her: HER | None, packet: Packet | None, fn) -> None:
        self.mpq_id = mpq.mpq_id
        self.generation = mpq.generation
        self.ctx: ExecutionContext = mpq.ctx
        self.msg_id = mpq.msg_id
        self.home = mpq.home_cluster
        self.kind = kind  # header | payload | completion
        self.her = her
        self.packet = packet
        self.fn = fn
        self.bytes_to_l1 = (
            0 if her is None else min(mpq.ctx.bytes_to_l1, her.size_bytes)
        )
        self.record = PacketRecord(
            uid=her.uid if her else -1,
            msg_id=self.msg_id,
            mpq_id=self.mpq_id,
            size_bytes=her.size_bytes if her else 0,
            kind=kind,
        )
        self.cluster = -1
        self.l1_addr = 0
        self.l1_alloc_id = -1
        self.staged: bytearray | None = None
        self.in_flight_cmds = 0
        self.awaiting_responses = False
        self.outcome = Outcome.OK
        self.hpu = -1


class MPQState:
    __slots__ = (
        "mpq_id",
        "generation",
        "ctx",
        "msg_id",
        "home_cluster",
        "phase",
        "pending",
        "outstanding",
        "eom_seen",
        "completion_released",
        "last_touch",
    )

    def __init__(self, mpq_id: int) -> None:
        self.mpq_id = mpq_id
        self.generation = 0
        self.ctx: ExecutionContext | None = None
        self.msg_id = -1
        self.home_cluster = -1
        self.phase = Phase.IDLE
        self.pending: deque[tuple[HER, Packet]] = deque()
        self.outstanding = 0  # dispatched header/payload tasks not yet completed
        self.eom_seen = False
        self.completion_released = False
        self.last_touch = 0

    def activate(self, ctx: ExecutionContext, msg_id: int, home: int, now: int) -> None:
        self.ctx = ctx
        self.msg_id = msg_id
        self.home_cluster = home
        self.phase = Phase.AWAITING_HEADER
        self.pending.clear()
        self.outstanding = 0
        self.eom_seen = False
        self.completion_released = False
        self.last_touch = now


class Scheduler:
    def __init__(self, sim: Simulator, cfg: PsPINConfig, contexts: dict[int, ExecutionContext]) -> None:
        self.sim = sim
        self.cfg = cfg
        self.contexts = contexts
        self.stats = sim.stats
        self.mpqs: dict[int, MPQState] = {}
        self.lru: OrderedDict[int, None] = OrderedDict()  # active MPQs, LRU first
        self.clusters = []  # wired by assembly
        self.nic = None
        self._her_queue_len = 0
        self._mpq_next_free = 0
        self._dispatch_queue: deque[Task] = deque()
        self._dispatch_next_free = 0
        self._dispatch_scheduled = False
        self._dispatch_blocked = False
        self._merge_next_free = 0
        self._lru_scan_armed = False

    # HER intake: the engine consumes one HER per cycle.

    def her_queue_len(self) -> int:
        return self._her_queue_len

    def submit_her(self, her: HER, pkt: Packet) -> None:
        self._her_queue_len += 1
        at = max(self.sim.now, self._mpq_next_free)
        self._mpq_next_free = at + 1
        self.sim.schedule(at, self._process_her, her, pkt)

    def _process_her(self, her: HER, pkt: Packet) -> None:
        self._her_queue_len -= 1
        if self._her_queue_len == self.cfg.her_queue_depth - 1:
            self.nic.wake()
        now = self.sim.now
        mpq = self.mpqs.get(her.mpq_id)
        if mpq is None:
            mpq = MPQState(her.mpq_id)
            self.mpqs[her.mpq_id] = mpq

        if her.kind == PacketKind.HEADER:
            ctx = self.contexts[her.ctx_id]
            mpq.generation += 1
            mpq.activate(ctx, her.msg_id, her.msg_id % self.cfg.num_clusters, now)
            self._touch(mpq)
            self._arm_lru_scan()
            fn = ctx.header_handler if ctx.header_handler is not None else ctx.payload_handler
            mpq.phase = Phase.HEADER_RUNNING
            if her.eom:
                mpq.eom_seen = True
                self.lru.pop(mpq.mpq_id, None)
            self._release(Task(mpq, "header", her, pkt, fn), now)
            return

        if mpq.phase in (Phase.IDLE, Phase.COMPLETING) or mpq.ctx is None:
            # Payload for a dead or never-activated queue: reordering is
            # not supported, count it and reclaim the buffer space.
            self.stats.bump("protocol_violations")
            self.nic.drop_packet(her.alloc_id)
            return

        self._touch(mpq)
        if her.eom:
            mpq.eom_seen = True
            self.lru.pop(mpq.mpq_id, None)  # draining, no longer a stale candidate
            if mpq.phase == Phase.FLOWING:
                mpq.phase = Phase.DRAINING
        if mpq.phase == Phase.HEADER_RUNNING:
            mpq.pending.append((her, pkt))
        else:  # FLOWING / DRAINING: release in FIFO order
            self._release(Task(mpq, "payload", her, pkt, mpq.ctx.payload_handler), now)

    def _touch(self, mpq: MPQState) -> None:
        mpq.last_touch = self.sim.now
        self.lru.pop(mpq.mpq_id, None)
        self.lru[mpq.mpq_id] = None

    # Task release and dispatch.

    def _release(self, task: Task, now: int) -> None:
        mpq = self.mpqs[task.mpq_id]
        if task.fn is None:
            # No handler bound for this phase: the task costs nothing and
            # completes at the scheduler without dispatching.
            mpq.outstanding += 1
            task.record.t_her = now
            self.sim.schedule(
                now + 1,
                self.on_feedback,
                CompletionNotification(task.mpq_id, task.her, Outcome.OK, task),
            )
            return
        mpq.outstanding += 1
        task.record.t_her = now
        self._dispatch_queue.append(task)
        self._pump_dispatch()

    def _pump_dispatch(self) -> None:
        if self._dispatch_scheduled or self._dispatch_blocked or not self._dispatch_queue:
            return
        self._dispatch_scheduled = True
        at = max(self.sim.now, self._dispatch_next_free)
        self.sim.schedule(at, self._dispatch_head)

    def _dispatch_head(self) -> None:
        self._dispatch_scheduled = False
        if not self._dispatch_queue:
            return
        now = self.sim.now
        queue = self._dispatch_queue
        picked = None
        if self.cfg.dispatch_policy == "skip_blocked":
            for i, cand in enumerate(queue):
                cluster = self._place(cand)
                if cluster is not None:
                    picked = (i, cand, cluster)
                    break
        else:
            cand = queue[0]
            cluster = self._place(cand)
            if cluster is not None:
                picked = (0, cand, cluster)
        if picked is None:
            self._dispatch_blocked = True
            self.stats.bump("dispatcher_blocked_events")
            return
        i, task, cluster = picked
        del queue[i]
        task.cluster = cluster.cluster_id
        task.record.t_dispatch = now
        self._dispatch_next_free = now + 1
        cluster.reserve_incoming(task)
        self.sim.schedule(now + self.cfg.her_to_cched_cycles, cluster.arrive, task)
        self._pump_dispatch()

    def _place(self, task: Task):
        home = self.clusters[task.home]
        if home.can_accept(task):
            return home
        best = None
        best_load = None
        for cl in self.clusters:
            if cl.can_accept(task):
                load = cl.load_metric()
                if best_load is None or load < best_load:
                    best, best_load = cl, load
        return best

    def notify_capacity_freed(self) -> None:
        if self._dispatch_blocked:
            self._dispatch_blocked = False
            self._pump_dispatch()

    # Feedback path: completion notifications merge into the engine one
    # per cycle and drive the MPQ state machine.

    def merge_feedback(self, notif: CompletionNotification, granted_at: int) -> None:
        at = max(granted_at, self._merge_next_free)
        self._merge_next_free = at + 1
        self.sim.schedule(at + 1, self.on_feedback, notif)

    def on_feedback(self, notif: CompletionNotification) -> None:
        now = self.sim.now
        task: Task = notif.task_ref
        task.record.t_notif_recv = now
        mpq = self.mpqs.get(notif.mpq_id)

        if task.her is not None:
            self.stats.packet_records.append(task.record)
            self.nic.free_packet(task.her.alloc_id)
            self.stats.note_completion(now, task.her.size_bytes * 8)
        else:
            self.stats.task_records.append(task.record)

        if task.outcome != Outcome.OK:
            self.stats.bump(f"handler_{task.outcome.value}")
            task.ctx.error_flag = task.outcome.value

        if mpq is None or task.generation != mpq.generation or mpq.ctx is None:
            self.stats.bump("stale_feedback_ignored")
            return

        if task.kind == "completion":
            self._retire_mpq(mpq)
            return

        mpq.outstanding -= 1
        if task.kind == "header" and mpq.phase == Phase.HEADER_RUNNING:
            mpq.phase = Phase.DRAINING if mpq.eom_seen else Phase.FLOWING
            while mpq.pending:
                her, pkt = mpq.pending.popleft()
                self._release(Task(mpq, "payload", her, pkt, mpq.ctx.payload_handler), now)
        self._maybe_complete(mpq, now)

    def _maybe_complete(self, mpq: MPQState, now: int) -> None:
        if (
            mpq.eom_seen
            and not mpq.completion_released
            and mpq.outstanding == 0
            and not mpq.pending
            and mpq.phase in (Phase.FLOWING, Phase.DRAINING)
        ):
            mpq.completion_released = True
            mpq.phase = Phase.COMPLETING
            if mpq.ctx.completion_handler is not None:
                self._release_completion(mpq, now)
            else:
                self._retire_mpq(mpq)

    def _release_completion(self, mpq: MPQState, now: int) -> None:
        task = Task(mpq, "completion", None, None, mpq.ctx.completion_handler)
        task.record.t_her = now
        self._dispatch_queue.append(task)
        self._pump_dispatch()

    def _retire_mpq(self, mpq: MPQState) -> None:
        mpq.phase = Phase.IDLE
        mpq.ctx = None
        self.lru.pop(mpq.mpq_id, None)
        self.stats.bump("messages_completed")
        self.nic.mpq_idle(mpq.mpq_id)

    # Stale-MPQ monitor: periodic pseudo-LRU scan.

    def _arm_lru_scan(self) -> None:
        if not self._lru_scan_armed and self.lru:
            self._lru_scan_armed = True
            self.sim.schedule(self.sim.now + self.cfg.lru_scan_period, self._lru_scan)

    def _lru_scan(self) -> None:
        self._lru_scan_armed = False
        now = self.sim.now
        if self.lru:
            victim_id = next(iter(self.lru))
            mpq = self.mpqs[victim_id]
            # Only queues still waiting for packets can go stale; once the
            # end-of-message arrived the queue is draining, and stuck
            # handlers are the watchdog's job.
            if (
                mpq.ctx is not None
                and not mpq.eom_seen
                and now - mpq.last_touch > mpq.ctx.mpq_idle_threshold_cycles
            ):
                self._reset_mpq(mpq)
        self._arm_lru_scan()

    def _reset_mpq(self, mpq: MPQState) -> None:
        """Forced resource release for a message that stopped arriving."""
        for her, _pkt in mpq.pending:
            self.nic.drop_packet(her.alloc_id)
        mpq.pending.clear()
        mpq.ctx.error_flag = "stale"
        self.stats.bump("mpq_stale_resets")
        mpq.generation += 1  # outstanding feedback becomes stale
        mpq.phase = Phase.IDLE
        mpq.ctx = None
        self.lru.pop(mpq.mpq_id, None)
        self.nic.mpq_idle(mpq.mpq_id)
