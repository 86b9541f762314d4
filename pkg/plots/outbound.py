#!/usr/bin/env python3
"""Outbound-flow figure: sending data out through the NIC or to the host,
sourced from L1 versus the L2 packet buffer."""

import sys
from collections import defaultdict

from _style import FigureSpec, GRID_KW, PALETTE, load_rows, new_figure, run_script

SPEC = FigureSpec(
    kind="outbound",
    schema="pspin-outbound-v1",
    columns=("kind", "src", "pkt_bytes", "throughput_gbps", "goodput_gbps"),
)


def render(csv_path):
    rows = load_rows(csv_path, SPEC)
    panels = sorted({r["kind"] for r in rows})
    fig, axes = new_figure(ncols=len(panels))
    if len(panels) == 1:
        axes = [axes]
    for ax, kind in zip(axes, panels):
        series = defaultdict(list)
        for r in rows:
            if r["kind"] == kind:
                series[r["src"]].append((int(r["pkt_bytes"]), float(r["throughput_gbps"])))
        for i, (src, points) in enumerate(sorted(series.items())):
            points.sort()
            ax.plot(
                [p[0] for p in points], [p[1] for p in points],
                marker="o", markersize=3, color=PALETTE[i],
                label=f"from {src.upper()}",
            )
        ax.set_title("NIC ping-pong" if kind == "pingpong" else "DMA to host", fontsize=9)
        ax.set_xlabel("packet size (B)")
        ax.set_ylabel("throughput (Gbit/s)")
        ax.set_xscale("log", base=2)
        ax.set_ylim(0, 520)
        ax.grid(**GRID_KW)
        ax.legend(fontsize=7)
    return fig


if __name__ == "__main__":
    sys.exit(run_script(render, sys.argv, "outbound.csv", "outbound.pdf"))
