"""Processing cluster: cluster-local scheduler, HPU drivers, arbiters.

Task lifecycle inside a cluster:

    dispatch -> [task FIFO] -> L2-to-L1 staging DMA -> runnable queue
             -> 1-cycle assignment to the lowest idle HPU -> handler
             -> doorbell -> completion buffering -> feedback arbiter
             -> inter-cluster merge -> MPQ engine / NIC inbound

A task occupies a FIFO slot from dispatch until assignment and holds its
L1 packet-region reservation until its completion notification wins the
per-cluster feedback arbiter (one grant per cycle, round robin).  Each
HPU driver can buffer one completed task whose notification is still
pending and start a fresh handler meanwhile; when the buffer is full the
core holds the finished task and stalls, which is the backpressure path
that eventually blocks the task dispatcher.
"""

from __future__ import annotations

from collections import deque

from .config import CompletionNotification, PsPINConfig
from .engine import Simulator
from .inbound import RingAllocator
from .memory import MemorySystem
from .scheduler import Scheduler, Task


class RoundRobinArbiter:
    """One grant per cycle among competing requesters, round robin.

    A request made in cycle t is eligible for a grant in the same cycle
    when the arbiter is free, so a lone requester is granted immediately;
    simultaneous requesters are granted on consecutive cycles starting
    from the last-granted position.
    """

    def __init__(self, sim: Simulator, n: int, grant_fn) -> None:
        self.sim = sim
        self.n = n
        self.grant_fn = grant_fn  # called as grant_fn(requester_id, cycle)
        self.pending: set[int] = set()
        self.last = n - 1
        self.next_free = 0
        self._armed = False

    def request(self, rid: int) -> None:
        self.pending.add(rid)
        self._arm()

    def _arm(self) -> None:
        if not self._armed and self.pending:
            self._armed = True
            self.sim.schedule(max(self.sim.now, self.next_free), self._grant)

    def _grant(self) -> None:
        self._armed = False
        if not self.pending:
            return
        now = self.sim.now
        for step in range(1, self.n + 1):
            rid = (self.last + step) % self.n
            if rid in self.pending:
                self.pending.discard(rid)
                self.last = rid
                self.next_free = now + 1
                self.grant_fn(rid, now)
                break
        self._arm()

    def pump(self) -> None:
        self._arm()


class HpuDriver:
    __slots__ = (
        "cluster",
        "hpu_id",
        "running",
        "held_done",
        "buffered",
        "blocked_until",
        "_occupied",
    )

    def __init__(self, cluster: "Cluster", hpu_id: int) -> None:
        self.cluster = cluster
        self.hpu_id = hpu_id
        self.running: Task | None = None
        self.held_done = False          # running slot holds a finished task
        self.buffered: Task | None = None
        self.blocked_until = 0          # environment reset after fault/kill
        self._occupied = False

    def core_free(self, now: int) -> bool:
        return self.running is None and now >= self.blocked_until

    def _update_occupancy(self) -> None:
        occupied = self.running is not None or self.buffered is not None
        stats = self.cluster.sim.stats
        if occupied and not self._occupied:
            stats.hpu_acquired(self.cluster.cluster_id, self.hpu_id)
        elif not occupied and self._occupied:
            stats.hpu_released()
        self._occupied = occupied

    def start_task(self, task: Task) -> None:
        task.hpu = self.hpu_id
        task.record.cluster = self.cluster.cluster_id
        task.record.hpu = self.hpu_id
        self.running = task
        self._update_occupancy()
        self.cluster.runtime.execute(self, task)

    def doorbell(self, task: Task, reset_penalty: int) -> None:
        """Handler finished (runtime loop step 4); called at doorbell time."""
        now = self.cluster.sim.now
        task.record.t_doorbell = now
        self.cluster.sim.stats.add_busy(
            self.cluster.cluster_id, self.hpu_id, now - task.record.t_assign
        )
        if reset_penalty:
            self.blocked_until = now + reset_penalty
        if self.buffered is None:
            self.buffered = task
            self.running = None
            self.held_done = False
            # Detecting "no in-flight commands" costs the driver a cycle.
            self.cluster.sim.schedule(now + 1, self._maybe_request_feedback, task)
            self.cluster.pump_assign()
        else:
            self.held_done = True  # core stalls holding the finished task

    def _maybe_request_feedback(self, task: Task) -> None:
        if self.buffered is task:
            if task.in_flight_cmds == 0:
                self.cluster.feedback_arbiter.request(self.hpu_id)
            else:
                task.awaiting_responses = True

    def on_cmd_response(self, task: Task) -> None:
        task.in_flight_cmds -= 1
        if task.in_flight_cmds == 0 and task.awaiting_responses:
            task.awaiting_responses = False
            if self.buffered is task:
                self.cluster.feedback_arbiter.request(self.hpu_id)

    def on_feedback_grant(self, cycle: int) -> None:
        task = self.buffered
        notif = CompletionNotification(task.mpq_id, task.her, task.outcome, task)
        task.record.t_notif_sent = cycle
        self.buffered = None
        self.cluster.release_task_resources(task)
        self.cluster.scheduler.merge_feedback(notif, cycle)
        if self.held_done:
            held = self.running
            self.running = None
            self.held_done = False
            self.buffered = held
            self.cluster.sim.schedule(cycle + 1, self._maybe_request_feedback, held)
            self.cluster.pump_assign()
        self._update_occupancy()


class Cluster:
    def __init__(
        self,
        sim: Simulator,
        cfg: PsPINConfig,
        mem: MemorySystem,
        scheduler: Scheduler,
        cluster_id: int,
    ) -> None:
        self.sim = sim
        self.cfg = cfg
        self.mem = mem
        self.scheduler = scheduler
        self.cluster_id = cluster_id
        self.runtime = None  # RuntimeEnv, wired by assembly
        self.l1_ring = RingAllocator(cfg.l1_pkt_region_bytes)
        self.fifo_used = 0
        self.outstanding = 0
        self.runnable: deque[Task] = deque()
        self.hpus = [HpuDriver(self, i) for i in range(cfg.hpus_per_cluster)]
        self.feedback_arbiter = RoundRobinArbiter(
            sim, cfg.hpus_per_cluster, self._feedback_granted
        )
        self.cmd_accept_next = 0  # command arbiter: one issue per cycle
        self._assign_next_free = 0
        self._assign_scheduled = False

    # Acceptance: enough FIFO room and L1 packet space (reserved up front).

    def can_accept(self, task: Task) -> bool:
        if self.fifo_used >= self.cfg.cched_fifo_depth:
            return False
        if task.bytes_to_l1 == 0:
            return True
        return self.l1_ring.would_fit(task.bytes_to_l1)

    def load_metric(self) -> tuple[int, int, int]:
        return (self.outstanding, self.l1_ring.live_bytes, self.cluster_id)

    def reserve_incoming(self, task: Task) -> None:
        self.fifo_used += 1
        self.outstanding += 1
        if task.bytes_to_l1 > 0:
            got = self.l1_ring.alloc(task.bytes_to_l1)
            assert got is not None, "dispatcher placed a task the cluster cannot hold"
            task.l1_alloc_id, task.l1_addr = got

    # Arrival after the fixed HER-to-CSCHED pipeline latency.

    def arrive(self, task: Task) -> None:
        now = self.sim.now
        task.record.t_cched = now
        if task.bytes_to_l1 > 0:
            start, end = self.mem.stage_to_l1(
                now, self.cluster_id, task.her.l2_addr, task.l1_addr, task.bytes_to_l1
            )
            task.record.t_dma_start = start
            task.record.t_dma_end = end
            self.sim.schedule(end, self._runnable, task)
        else:
            task.record.t_dma_start = now
            task.record.t_dma_end = now
            self._runnable(task)

    def _runnable(self, task: Task) -> None:
        if task.packet is not None and task.bytes_to_l1 > 0:
            task.staged = bytearray(task.packet.payload_view()[: task.bytes_to_l1])
        self.runnable.append(task)
        self.pump_assign()

    def pump_assign(self) -> None:
        if self._assign_scheduled or not self.runnable:
            return
        at = max(self.sim.now, self._assign_next_free)
        free_at = None
        for h in self.hpus:
            if h.running is None:
                t = at if h.blocked_until <= at else h.blocked_until
                if free_at is None or t < free_at:
                    free_at = t
        if free_at is None:
            return  # every core busy; the next doorbell re-pumps
        self._assign_scheduled = True
        self.sim.schedule(free_at, self._do_assign)

    def _do_assign(self) -> None:
        self._assign_scheduled = False
        if not self.runnable:
            return
        now = self.sim.now
        hpu = next((h for h in self.hpus if h.core_free(now)), None)
        if hpu is None:
            self.pump_assign()
            return
        task = self.runnable.popleft()
        self._assign_next_free = now + 1
        self.fifo_used -= 1
        task.record.t_assign = now + 1
        self.sim.schedule(now + 1, hpu.start_task, task)
        self.scheduler.notify_capacity_freed()
        self.pump_assign()

    def _feedback_granted(self, hpu_id: int, cycle: int) -> None:
        self.hpus[hpu_id].on_feedback_grant(cycle)

    def release_task_resources(self, task: Task) -> None:
        self.outstanding -= 1
        if task.l1_alloc_id >= 0:
            self.l1_ring.free(task.l1_alloc_id)
        self.scheduler.notify_capacity_freed()

    def command_accept_slot(self, at: int) -> int:
        """Per-cluster command arbiter: one command issue per cycle."""
        slot = at if at > self.cmd_accept_next else self.cmd_accept_next
        self.cmd_accept_next = slot + 1
        return slot
