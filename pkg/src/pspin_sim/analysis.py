"""Closed-form helpers: handler time budgets and buffer sizing.

`handler_budget` answers how long handlers may run before they become
the line-rate bottleneck for a given packet size and core count, and
`littles_buffer` sizes the packet buffer from line rate and packet
latency via Little's law.
"""

from __future__ import annotations


def handler_budget(hpus: int, pkt_bytes: int, rate_gbps: float) -> float:
    """Maximum handler duration (ns) that still sustains line rate.

    At `rate_gbps`, packets of `pkt_bytes` arrive every
    pkt_bytes*8/rate ns; `hpus` cores working in parallel multiply that
    budget.
    """
    if hpus <= 0 or pkt_bytes <= 0:
        raise ValueError("hpus and pkt_bytes must be positive")
    if rate_gbps <= 0:
        raise ValueError("rate_gbps must be positive")
    return hpus * pkt_bytes * 8 / rate_gbps


def littles_buffer(rate_gbps: float, latency_ns: float) -> float:
    """Packet-buffer bytes required to hold the in-flight data.

    Little's law: bytes in flight = arrival rate x residence time
    = (rate_gbps Gbit/s x latency_ns ns) / 8 bits per byte.
    """
    if rate_gbps < 0 or latency_ns < 0:
        raise ValueError("rate and latency must be non-negative")
    return rate_gbps * latency_ns / 8


def hct_markers(
    hpus: int, rates_gbps: tuple[float, ...] = (200.0, 400.0, 800.0), pkt_bytes: tuple[int, ...] = (256, 1024, 4096)
) -> list[dict]:
    """Handler critical times for packet-size/rate combinations, with the
    core count scaled alongside the line rate (32 cores at 400 Gbit/s)."""
    out = []
    for rate in rates_gbps:
        scaled_hpus = max(1, round(hpus * rate / 400.0))
        for pkt in pkt_bytes:
            out.append(
                {
                    "rate_gbps": rate,
                    "pkt_bytes": pkt,
                    "hpus": scaled_hpus,
                    "hct_ns": handler_budget(scaled_hpus, pkt, rate),
                }
            )
    return out
