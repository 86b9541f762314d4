#!/usr/bin/env python3
"""Unloaded packet-latency breakdown: stacked pipeline stages per packet size."""

import sys

from _style import FigureSpec, GRID_KW, PALETTE, load_rows, new_figure, run_script

SPEC = FigureSpec(
    kind="latency",
    schema="pspin-latency-v1",
    columns=("pkt_bytes", "latency_ns", "her_to_cched_ns", "dma_ns",
             "assign_ns", "invoke_ns", "handler_ns", "doorbell_ns", "feedback_ns"),
)

STAGES = (
    ("her_to_cched_ns", "HER to CSCHED"),
    ("dma_ns", "L2 to L1 DMA"),
    ("assign_ns", "assign"),
    ("invoke_ns", "invoke"),
    ("handler_ns", "handler"),
    ("doorbell_ns", "doorbell"),
    ("feedback_ns", "notification"),
)


def render(csv_path):
    rows = load_rows(csv_path, SPEC)
    rows.sort(key=lambda r: int(r["pkt_bytes"]))
    labels = [r["pkt_bytes"] + " B" for r in rows]
    fig, ax = new_figure()
    bottom = [0.0] * len(rows)
    for i, (col, label) in enumerate(STAGES):
        vals = [float(r[col]) for r in rows]
        ax.bar(labels, vals, bottom=bottom, label=label,
               color=PALETTE[i % len(PALETTE)], width=0.6)
        bottom = [b + v for b, v in zip(bottom, vals)]
    for x, r in enumerate(rows):
        ax.text(x, bottom[x] + 0.4, r["latency_ns"], ha="center", fontsize=7)
    ax.set_ylabel("packet latency (ns)")
    ax.set_xlabel("packet size")
    ax.grid(axis="y", **GRID_KW)
    ax.legend(fontsize=7)
    return fig


if __name__ == "__main__":
    sys.exit(run_script(render, sys.argv, "latency.csv", "latency.pdf"))
