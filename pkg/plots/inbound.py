#!/usr/bin/env python3
"""Inbound-flow figure: sustained throughput and HPU usage as handlers grow.

Left panel: goodput vs handler instruction count, one curve per packet
size, with the analytic bound dotted and misaligned-packet points dashed.
Right panel: HPUs utilized for the same sweeps.
"""

import sys
from collections import defaultdict

from _style import FigureSpec, GRID_KW, PALETTE, load_rows, new_figure, run_script

SPEC = FigureSpec(
    kind="inbound",
    schema="pspin-inbound-v1",
    columns=("pkt_bytes", "instructions", "flows", "misaligned",
             "throughput_gbps", "bound_gbps", "hpus_used", "hpus_peak"),
)


def render(csv_path):
    rows = load_rows(csv_path, SPEC)
    series = defaultdict(list)  # (pkt, misaligned) -> [(x, tput, bound, peak)]
    for r in rows:
        if int(r["flows"]) <= 1:
            continue  # single-stream rows feed the utilization table, not the curves
        key = (int(r["pkt_bytes"]), int(r["misaligned"]))
        series[key].append(
            (int(r["instructions"]), float(r["throughput_gbps"]),
             float(r["bound_gbps"]), int(r["hpus_peak"]))
        )
    fig, (ax_t, ax_h) = new_figure(ncols=2)
    for i, ((pkt, mis), points) in enumerate(sorted(series.items())):
        points.sort()
        xs = [p[0] for p in points]
        style = dict(color=PALETTE[i % len(PALETTE)],
                     linestyle="--" if mis else "-", marker="o", markersize=3)
        label = f"{pkt} B" + (" +1 B" if mis else "")
        ax_t.plot(xs, [p[1] for p in points], label=label, **style)
        if not mis:
            ax_t.plot(xs, [p[2] for p in points], color=style["color"],
                      linestyle=":", linewidth=0.9, alpha=0.7)
            ax_h.plot(xs, [p[3] for p in points], label=label, **style)
    for ax, ylabel in ((ax_t, "throughput (Gbit/s)"), (ax_h, "HPUs utilized")):
        ax.set_xlabel("handler instructions")
        ax.set_ylabel(ylabel)
        ax.set_xscale("symlog", linthresh=4)
        ax.grid(**GRID_KW)
        ax.legend(fontsize=7)
    ax_t.set_ylim(bottom=0)
    ax_h.set_ylim(0, 33)
    return fig


if __name__ == "__main__":
    sys.exit(run_script(render, sys.argv, "inbound.csv", "inbound.pdf"))
