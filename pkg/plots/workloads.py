#!/usr/bin/env python3
"""Application-handler throughput versus packet size, one curve per workload."""

import sys
from collections import defaultdict

from _style import FigureSpec, GRID_KW, PALETTE, load_rows, new_figure, run_script

SPEC = FigureSpec(
    kind="workloads",
    schema="pspin-workloads-v1",
    columns=("workload", "pkt_bytes", "goodput_gbps", "oracle_ok", "finished"),
)


def render(csv_path):
    rows = load_rows(csv_path, SPEC)
    series = defaultdict(list)
    for r in rows:
        series[r["workload"]].append((int(r["pkt_bytes"]), float(r["goodput_gbps"])))
    fig, ax = new_figure()
    for i, (name, points) in enumerate(sorted(series.items())):
        points.sort()
        ax.plot(
            [p[0] for p in points], [p[1] for p in points],
            marker="o", markersize=3, color=PALETTE[i % len(PALETTE)], label=name,
        )
    ax.set_xlabel("packet size (B)")
    ax.set_ylabel("throughput (Gbit/s)")
    ax.set_xscale("log", base=2)
    ax.set_ylim(bottom=0)
    ax.grid(**GRID_KW)
    ax.legend(fontsize=7, ncol=2)
    return fig


if __name__ == "__main__":
    sys.exit(run_script(render, sys.argv, "workloads.csv", "workloads.pdf"))
