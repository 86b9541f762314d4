#!/usr/bin/env python3
"""Buffer sizing and handler budgets: packet-buffer bytes over latency for
several line rates with handler-critical-time markers, plus the handler
duration budget per packet size."""

import sys
from collections import defaultdict

from _style import FigureSpec, GRID_KW, PALETTE, load_rows, new_figure, run_script

SPEC = FigureSpec(
    kind="scaling",
    schema="pspin-scaling-v1",
    columns=("kind", "rate_gbps", "latency_ns", "pkt_bytes", "hpus", "value"),
)


def render(csv_path):
    rows = load_rows(csv_path, SPEC)
    fig, (ax_b, ax_h) = new_figure(ncols=2)

    buffers = defaultdict(list)
    markers = []
    budgets = defaultdict(list)
    for r in rows:
        if r["kind"] == "buffer_bytes":
            buffers[float(r["rate_gbps"])].append((float(r["latency_ns"]), float(r["value"])))
        elif r["kind"] == "hct_ns":
            markers.append((float(r["rate_gbps"]), int(r["pkt_bytes"]), float(r["value"])))
        elif r["kind"] == "budget_ns":
            budgets[float(r["rate_gbps"])].append((int(r["pkt_bytes"]), float(r["value"])))

    for i, (rate, points) in enumerate(sorted(buffers.items())):
        points.sort()
        ax_b.plot(
            [p[0] / 1000 for p in points], [p[1] / 1024 for p in points],
            color=PALETTE[i], label=f"{rate:.0f} Gbit/s",
        )
    for rate, pkt, hct in markers:
        idx = sorted(buffers).index(rate) if rate in buffers else 0
        ax_b.plot(hct / 1000, rate * hct / 8 / 1024, marker="x",
                  color=PALETTE[idx], markersize=5)
    ax_b.set_xlabel("packet latency (us)")
    ax_b.set_ylabel("packet buffer (KiB)")
    ax_b.grid(**GRID_KW)
    ax_b.legend(fontsize=7, title="line rate", title_fontsize=7)

    for i, (rate, points) in enumerate(sorted(budgets.items())):
        points.sort()
        ax_h.plot([p[0] for p in points], [p[1] for p in points],
                  marker="o", markersize=3, color=PALETTE[i], label=f"{rate:.0f} Gbit/s")
    ax_h.set_xlabel("packet size (B)")
    ax_h.set_ylabel("handler budget (ns)")
    ax_h.set_xscale("log", base=2)
    ax_h.set_yscale("log")
    ax_h.grid(**GRID_KW)
    ax_h.legend(fontsize=7, title="line rate", title_fontsize=7)
    return fig


if __name__ == "__main__":
    sys.exit(run_script(render, sys.argv, "scaling.csv", "scaling.pdf"))
