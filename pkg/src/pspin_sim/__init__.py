"""Cycle-approximate simulator of an in-NIC packet-processing engine."""

from .config import (
    Command,
    CommandKind,
    CompletionNotification,
    ExecutionContext,
    HER,
    Outcome,
    Packet,
    PacketKind,
    PsPINConfig,
    load_config,
    save_config,
    validate,
)
from .engine import Simulator, StatsRecorder
from .sim import RunResult, Simulation
from .trace import PacketTrace, load_trace, make_trace, save_trace

__all__ = [
    "Command",
    "CommandKind",
    "CompletionNotification",
    "ExecutionContext",
    "HER",
    "Outcome",
    "Packet",
    "PacketKind",
    "PsPINConfig",
    "PacketTrace",
    "RunResult",
    "Simulation",
    "Simulator",
    "StatsRecorder",
    "load_config",
    "load_trace",
    "make_trace",
    "save_config",
    "save_trace",
    "validate",
]
