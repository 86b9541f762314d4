"""Simulation assembly: wires the NIC, scheduler, clusters, and sinks.

One `Simulation` owns one engine instance and is confined to a single
thread of control; parameter sweeps build independent instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cluster import Cluster
from .commands import HostDmaEngine, HostMemory, NicOutboundEngine
from .config import ExecutionContext, PsPINConfig, validate, validate_contexts
from .engine import Simulator, StatsRecorder, StatsSnapshot
from .inbound import NicInbound
from .memory import MemorySystem
from .runtime import RuntimeEnv
from .scheduler import Scheduler
from .trace import PacketTrace


class AssemblyError(ValueError):
    pass


@dataclass
class RunResult:
    snapshot: StatsSnapshot
    stats: StatsRecorder
    host: HostMemory
    sent_packets: list[bytes]
    cfg: PsPINConfig
    finished: bool
    extra: dict = field(default_factory=dict)

    @property
    def goodput_gbps(self) -> float:
        return self.stats.goodput_gbps()

    @property
    def tx_gbps(self) -> float:
        return self.stats.drained_gbps(self.stats.tx_log)

    @property
    def host_gbps(self) -> float:
        return self.stats.drained_gbps(self.stats.host_log)

    @property
    def packet_records(self):
        return self.stats.packet_records


class Simulation:
    def __init__(
        self,
        cfg: PsPINConfig,
        contexts: list[ExecutionContext],
        trace: PacketTrace,
        rate_gbps: float | None = None,
    ) -> None:
        violations = validate(cfg)
        if violations:
            raise AssemblyError("invalid config: " + "; ".join(violations))
        ctx_violations = validate_contexts(cfg, contexts)
        if ctx_violations:
            raise AssemblyError("invalid contexts: " + "; ".join(ctx_violations))

        self.cfg = cfg
        self.sim = Simulator()
        self.mem = MemorySystem(cfg, self.sim.stats)
        self.host = HostMemory()
        self.scheduler = Scheduler(self.sim, cfg, {c.ctx_id: c for c in contexts})
        self.clusters = [
            Cluster(self.sim, cfg, self.mem, self.scheduler, c)
            for c in range(cfg.num_clusters)
        ]
        self.outbound = NicOutboundEngine(self.sim, self.mem, self.host, cfg.outbound_queue_depth)
        self.hostdma = HostDmaEngine(self.sim, self.mem, self.host, cfg.outbound_queue_depth)
        self.outbound.clusters = self.clusters
        self.hostdma.clusters = self.clusters
        self.env = RuntimeEnv(
            self.sim, cfg, self.mem, self.clusters, self.outbound, self.hostdma
        )
        for cluster in self.clusters:
            cluster.runtime = self.env
        for ctx in contexts:
            self.env.install_context(ctx)
        self.nic = NicInbound(self.sim, cfg, self.mem, trace, contexts, rate_gbps)
        self.nic.scheduler = self.scheduler
        self.scheduler.nic = self.nic
        self.scheduler.clusters = self.clusters

    def run(self, until: int | None = None) -> RunResult:
        self.nic.start()
        snapshot = self.sim.run(until)
        finished = self.nic.done and self.nic.in_flight == 0
        return RunResult(
            snapshot=snapshot,
            stats=self.sim.stats,
            host=self.host,
            sent_packets=self.outbound.sent_packets,
            cfg=self.cfg,
            finished=finished,
        )
