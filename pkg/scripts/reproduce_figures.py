#!/usr/bin/env python3
"""Reproduce every figure: run all sweep presets, then render each one.

    python scripts/reproduce_figures.py [out_dir] [--quick]

`--quick` shrinks the grids for a fast smoke pass (a few minutes becomes
well under one).
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    args = [a for a in sys.argv[1:] if a != "--quick"]
    quick = "--quick" in sys.argv[1:]
    out = Path(args[0]) if args else ROOT / "results"
    csv_dir = out / "csv"
    fig_dir = out / "figures"

    sweep = [sys.executable, "-m", "pspin_sim.cli", "sweep", "all", "--out", str(csv_dir)]
    if quick:
        sweep.append("--quick")
    rc = subprocess.run(sweep, cwd=ROOT).returncode
    if rc != 0:
        return rc

    for preset in ("latency", "inbound", "outbound", "workloads", "scaling"):
        rc = subprocess.run(
            [sys.executable, str(ROOT / "plots" / f"{preset}.py"), str(csv_dir), str(fig_dir)],
        ).returncode
        if rc != 0:
            return rc
    print(f"figures in {fig_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
