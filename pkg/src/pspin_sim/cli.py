"""Command-line harness: single runs, figure-reproducing sweeps, and the
closed-form calculators.  Every output is a versioned CSV so the plot
scripts can consume results without touching the simulator.

Subcommands:
    run       one simulation (trace file or named workload) -> CSVs
    sweep     a named experiment preset -> one CSV per preset
    budget    handler duration budget for (hpus, pkt_bytes, rate)
    littles   packet-buffer sizing from (rate, latency)
    validate  check a config file and exit nonzero on violations
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .analysis import handler_budget, hct_markers, littles_buffer
from .config import ExecutionContext, PsPINConfig, load_config, validate
from .sim import RunResult, Simulation
from .trace import load_trace, make_trace
from .workloads import WORKLOAD_NAMES, build

SCHEMAS = {
    "packets": "pspin-packets-v1",
    "series": "pspin-series-v1",
    "summary": "pspin-summary-v1",
    "latency": "pspin-latency-v1",
    "inbound": "pspin-inbound-v1",
    "outbound": "pspin-outbound-v1",
    "workloads": "pspin-workloads-v1",
    "scaling": "pspin-scaling-v1",
}

PRESET_NAMES = ("latency", "inbound", "outbound", "workloads", "scaling")


def _writer(path: Path, schema: str, columns: list[str]):
    fh = open(path, "w", newline="")
    fh.write(f"# schema={schema}\n")
    w = csv.writer(fh)
    w.writerow(columns)
    return fh, w


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.4f}"
    return str(x)


def write_packets_csv(path: Path, result: RunResult) -> None:
    cols = [
        "uid", "msg_id", "mpq_id", "kind", "size_bytes", "latency_ns",
        "t_her", "t_dispatch", "t_cched", "t_dma_start", "t_dma_end",
        "t_assign", "t_invoke_end", "t_handler_end", "t_doorbell",
        "t_notif_sent", "t_notif_recv",
        "her_to_cched_ns", "dma_ns", "assign_ns", "invoke_ns",
        "handler_ns", "doorbell_ns", "feedback_ns", "cluster", "hpu", "outcome",
    ]
    fh, w = _writer(path, SCHEMAS["packets"], cols)
    with fh:
        for r in result.packet_records:
            done = r.t_notif_recv >= 0
            w.writerow(
                [
                    r.uid, r.msg_id, r.mpq_id, r.kind, r.size_bytes,
                    r.latency if done else -1,
                    r.t_her, r.t_dispatch, r.t_cched, r.t_dma_start, r.t_dma_end,
                    r.t_assign, r.t_invoke_end, r.t_handler_end, r.t_doorbell,
                    r.t_notif_sent, r.t_notif_recv,
                    r.t_cched - r.t_her if r.t_cched >= 0 else -1,
                    r.t_dma_end - r.t_dma_start if r.t_dma_end >= 0 else -1,
                    r.t_assign - r.t_dma_end if r.t_assign >= 0 else -1,
                    r.t_invoke_end - r.t_assign if r.t_invoke_end >= 0 else -1,
                    r.t_handler_end - r.t_invoke_end if r.t_handler_end >= 0 else -1,
                    r.t_doorbell - r.t_handler_end if r.t_doorbell >= 0 else -1,
                    r.t_notif_recv - r.t_doorbell if done and r.t_doorbell >= 0 else -1,
                    r.cluster, r.hpu, r.outcome or "ok",
                ]
            )


def write_series_csv(path: Path, result: RunResult, window: int = 1000) -> None:
    fh, w = _writer(path, SCHEMAS["series"], ["t_ns", "goodput_gbps"])
    with fh:
        for t, gbps in result.stats.throughput_series(window):
            w.writerow([t, _fmt(gbps)])


def write_summary_csv(path: Path, result: RunResult) -> None:
    s = result.stats
    rows = [
        ("goodput_gbps", _fmt(result.goodput_gbps)),
        ("tx_gbps", _fmt(result.tx_gbps)),
        ("host_gbps", _fmt(result.host_gbps)),
        ("hpus_used", s.hpus_used),
        ("hpus_peak", s.peak_hpu_concurrency),
        ("finished", int(result.finished)),
        ("first_injection", s.first_injection if s.first_injection is not None else -1),
        ("last_completion", s.last_completion if s.last_completion is not None else -1),
        ("oracle_problems", len(result.extra.get("oracle_problems", []))),
    ]
    for key, val in sorted(s.counters.items()):
        rows.append((f"counter.{key}", val))
    for key, val in sorted(s.link_bytes.items()):
        rows.append((f"link_bytes.{key}", val))
    for key, val in sorted(s.bank_conflicts.items()):
        rows.append((f"bank_conflicts.{key}", val))
    busy_total = sum(s.hpu_busy.values())
    rows.append(("hpu_busy_cycles_total", busy_total))
    fh, w = _writer(path, SCHEMAS["summary"], ["metric", "value"])
    with fh:
        for key, val in rows:
            w.writerow([key, val])


# --- single run ----------------------------------------------------------------


def _parse_params(pairs: list[str]) -> dict:
    out = {}
    for pair in pairs or []:
        key, _, raw = pair.partition("=")
        if not _:
            raise SystemExit(f"bad --param {pair!r}, expected key=value")
        try:
            out[key] = int(raw)
        except ValueError:
            out[key] = raw
    return out


def cmd_run(args) -> int:
    cfg = load_config(args.config) if args.config else PsPINConfig()
    violations = validate(cfg)
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.workload:
        params = _parse_params(args.param)
        if args.seed is not None:
            params["seed"] = args.seed
        wl = build(args.workload, params)
        if args.rate is not None:
            wl.rate_gbps = args.rate or None
        result = wl.run(cfg)
        problems = result.extra.get("oracle_problems", [])
        for p in problems:
            print(f"oracle: {p}", file=sys.stderr)
    elif args.trace:
        trace = load_trace(args.trace)

        def noop(api):
            pass

        ctx = ExecutionContext(
            ctx_id=0, flow_prefix=b"", header_handler=noop, payload_handler=noop,
            completion_handler=noop, scratchpad_bytes=64, handler_mem_bytes=64,
            bytes_to_l1=args.bytes_to_l1,
        )
        result = Simulation(cfg, [ctx], trace, args.rate).run()
    else:
        print("run: need --workload or --trace", file=sys.stderr)
        return 1

    write_packets_csv(out / "packets.csv", result)
    write_series_csv(out / "series.csv", result)
    write_summary_csv(out / "summary.csv", result)
    print(
        f"goodput {result.goodput_gbps:.2f} Gbit/s, "
        f"{len(result.packet_records)} packets, "
        f"hpus used {result.stats.hpus_used} (peak {result.stats.peak_hpu_concurrency}), "
        f"finished={result.finished}"
    )
    return 0 if result.finished and not result.extra.get("oracle_problems") else 2


# --- presets --------------------------------------------------------------------


def _empty_ctx(bytes_to_l1: int):
    def noop(api):
        pass

    return ExecutionContext(
        ctx_id=0, flow_prefix=b"", header_handler=noop, payload_handler=noop,
        completion_handler=noop, scratchpad_bytes=64, handler_mem_bytes=64,
        bytes_to_l1=bytes_to_l1,
    )


def preset_latency(cfg: PsPINConfig, out: Path) -> Path:
    cols = [
        "pkt_bytes", "latency_ns", "her_to_cched_ns", "dma_ns", "assign_ns",
        "invoke_ns", "handler_ns", "doorbell_ns", "feedback_ns",
    ]
    path = out / "latency.csv"
    fh, w = _writer(path, SCHEMAS["latency"], cols)
    with fh:
        for pkt in (64, 128, 256, 512, 1024):
            trace = make_trace(1, pkt, pkt)
            result = Simulation(cfg, [_empty_ctx(pkt)], trace).run()
            r = result.packet_records[0]
            w.writerow(
                [
                    pkt, r.latency, r.t_cched - r.t_her, r.t_dma_end - r.t_dma_start,
                    r.t_assign - r.t_dma_end, r.t_invoke_end - r.t_assign,
                    r.t_handler_end - r.t_invoke_end, r.t_doorbell - r.t_handler_end,
                    r.t_notif_recv - r.t_doorbell,
                ]
            )
    return path


def _inbound_run(cfg, pkt, instructions, flows, misaligned, npkts):
    # Multi-flow rows use the calibrated stress shape: 512-packet messages
    # dealt round-robin over concurrent flows, so message boundaries keep
    # exercising the header-before-payload gating at full rate.
    if flows > 1:
        msg_pkts = 512
        n_msgs = max(3 * flows, npkts // msg_pkts)
    else:
        msg_pkts = npkts
        n_msgs = 1
    wl = build(
        "synthetic",
        {
            "packet_size": pkt,
            "instructions": instructions,
            "flows": flows,
            "n_msgs": n_msgs,
            "pkts_per_msg": msg_pkts,
            "misaligned": int(misaligned),
        },
    )
    return wl.run(cfg)


def preset_inbound(cfg: PsPINConfig, out: Path, quick: bool = False) -> Path:
    cols = [
        "pkt_bytes", "instructions", "flows", "misaligned",
        "throughput_gbps", "bound_gbps", "hpus_used", "hpus_peak",
    ]
    path = out / "inbound.csv"
    fh, w = _writer(path, SCHEMAS["inbound"], cols)
    xs = (0, 4, 16, 64, 256, 1024)
    with fh:
        for pkt in (64, 512, 1024):
            npkts = 20000 if pkt == 64 else 4000
            if quick:
                npkts //= 4
            for x in xs:
                for flows, mis in [(16, False)] + ([(16, True)] if x == 0 else []):
                    result = _inbound_run(cfg, pkt, x, flows, mis, npkts)
                    wire = (pkt + 1) if mis else pkt
                    bound = min(512.0, cfg.total_hpus * wire * 8 / (x + 8))
                    w.writerow(
                        [
                            pkt, x, flows, int(mis),
                            _fmt(result.goodput_gbps), _fmt(bound),
                            result.stats.hpus_used, result.stats.peak_hpu_concurrency,
                        ]
                    )
            for x in (0, 4):  # single-stream rows: the one-HPU question
                result = _inbound_run(cfg, pkt, x, 1, False, npkts)
                bound = min(512.0, cfg.total_hpus * pkt * 8 / (x + 8))
                w.writerow(
                    [
                        pkt, x, 1, 0, _fmt(result.goodput_gbps), _fmt(bound),
                        result.stats.hpus_used, result.stats.peak_hpu_concurrency,
                    ]
                )
    return path


def preset_outbound(cfg: PsPINConfig, out: Path, quick: bool = False) -> Path:
    cols = ["kind", "src", "pkt_bytes", "throughput_gbps", "goodput_gbps"]
    path = out / "outbound.csv"
    fh, w = _writer(path, SCHEMAS["outbound"], cols)
    with fh:
        for kind in ("pingpong", "hostdma"):
            for src in ("l2", "l1"):
                for pkt in (64, 256, 512, 1024):
                    npkts = 6000 if pkt == 64 else 2500
                    if quick:
                        npkts //= 4
                    if kind == "pingpong":
                        wl = build(
                            "pingpong",
                            {"packet_size": pkt, "n_packets": npkts, "from_l1": int(src == "l1")},
                        )
                        result = wl.run(cfg)
                        tput = result.tx_gbps
                    else:
                        result = _hostdma_run(cfg, pkt, src, npkts)
                        tput = result.host_gbps
                    w.writerow(
                        [kind, src, pkt, _fmt(tput), _fmt(result.goodput_gbps)]
                    )
    return path


def _hostdma_run(cfg, pkt, src, npkts):
    def handler(api, _src=src):
        api.charge(4)
        api.dma_to_host("pkt_l1" if _src == "l1" else "pkt_l2", 0, api.pkt_size, 0)

    ctx = ExecutionContext(
        ctx_id=0, flow_prefix=b"", header_handler=handler,
        scratchpad_bytes=64, handler_mem_bytes=64, bytes_to_l1=pkt,
    )
    trace = make_trace(npkts, pkt, pkt, flows=64, interleave="rr")
    return Simulation(cfg, [ctx], trace, rate_gbps=400).run()


def preset_workloads(cfg: PsPINConfig, out: Path, quick: bool = False) -> Path:
    cols = [
        "workload", "pkt_bytes", "goodput_gbps", "hpus_used", "hpus_peak",
        "oracle_ok", "finished",
    ]
    path = out / "workloads.csv"
    fh, w = _writer(path, SCHEMAS["workloads"], cols)
    sizes = (64, 128, 256, 512, 1024)
    if quick:
        sizes = (512,)
    with fh:
        for name in ("reduce", "aggregate", "filtering", "kvstore", "strided_ddt", "histogram"):
            for pkt in sizes:
                params = {"packet_size": pkt}
                if quick and name in ("reduce", "histogram"):
                    params["n_msgs"] = 64
                wl = build(name, params)
                result = wl.run(cfg)
                problems = result.extra.get("oracle_problems", [])
                w.writerow(
                    [
                        name, pkt, _fmt(result.goodput_gbps),
                        result.stats.hpus_used, result.stats.peak_hpu_concurrency,
                        int(not problems), int(result.finished),
                    ]
                )
    return path


def preset_scaling(cfg: PsPINConfig, out: Path, quick: bool = False) -> Path:
    cols = ["kind", "rate_gbps", "latency_ns", "pkt_bytes", "hpus", "value"]
    path = out / "scaling.csv"
    fh, w = _writer(path, SCHEMAS["scaling"], cols)
    with fh:
        for rate in (200, 400, 800):
            for latency in range(0, 3001, 100):
                w.writerow(
                    ["buffer_bytes", rate, latency, "", "", _fmt(littles_buffer(rate, latency))]
                )
        for marker in hct_markers(cfg.total_hpus):
            w.writerow(
                [
                    "hct_ns", _fmt(marker["rate_gbps"]), "", marker["pkt_bytes"],
                    marker["hpus"], _fmt(marker["hct_ns"]),
                ]
            )
        for rate in (200, 400):
            for pkt in (64, 128, 256, 512, 1024, 2048, 4096):
                w.writerow(
                    [
                        "budget_ns", rate, "", pkt, cfg.total_hpus,
                        _fmt(handler_budget(cfg.total_hpus, pkt, rate)),
                    ]
                )
    return path


PRESETS = {
    "latency": preset_latency,
    "inbound": preset_inbound,
    "outbound": preset_outbound,
    "workloads": preset_workloads,
    "scaling": preset_scaling,
}


def _split_point_files(merged: Path, schema: str) -> None:
    """One tiny CSV per grid point alongside the merged preset CSV."""
    lines = merged.read_text().splitlines()
    if len(lines) < 3:
        return
    points_dir = merged.parent / f"{merged.stem}_points"
    points_dir.mkdir(exist_ok=True)
    header = lines[1]
    for i, row in enumerate(lines[2:]):
        (points_dir / f"{merged.stem}_{i:04d}.csv").write_text(
            f"# schema={schema}\n{header}\n{row}\n"
        )


def cmd_sweep(args) -> int:
    cfg = load_config(args.config) if args.config else PsPINConfig()
    violations = validate(cfg)
    if violations:
        for v in violations:
            print(f"config violation: {v}", file=sys.stderr)
        return 1
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    names = PRESET_NAMES if args.preset == "all" else (args.preset,)
    for name in names:
        fn = PRESETS[name]
        if name in ("latency",):
            path = fn(cfg, out)
        else:
            path = fn(cfg, out, quick=args.quick)
        _split_point_files(path, SCHEMAS[name])
        print(f"wrote {path}")
    return 0


def cmd_budget(args) -> int:
    try:
        ns = handler_budget(args.hpus, args.pkt_bytes, args.rate_gbps)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{ns:.2f}")
    return 0


def cmd_littles(args) -> int:
    try:
        nbytes = littles_buffer(args.rate_gbps, args.latency_ns)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"{nbytes:.0f}")
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    violations = validate(cfg)
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return 1
    print(f"ok: {cfg.total_hpus} HPUs, {cfg.num_clusters} clusters")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="pspin-sim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one simulation and write CSVs")
    p.add_argument("--config", help="config file (INI)")
    p.add_argument("--trace", help="packet trace file")
    p.add_argument("--workload", choices=WORKLOAD_NAMES, help="named workload")
    p.add_argument("--param", action="append", help="workload param key=value")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--rate", type=float, default=None, help="injection rate Gbit/s (0 = unlimited)")
    p.add_argument("--bytes-to-l1", type=int, default=64)
    p.add_argument("--out", default="out")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("sweep", help="run an experiment preset")
    p.add_argument("preset", choices=PRESET_NAMES + ("all",))
    p.add_argument("--config", help="config file (INI)")
    p.add_argument("--out", default="out")
    p.add_argument("--quick", action="store_true", help="smaller grids for smoke runs")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("budget", help="max handler duration at line rate (ns)")
    p.add_argument("hpus", type=int)
    p.add_argument("pkt_bytes", type=int)
    p.add_argument("rate_gbps", type=float)
    p.set_defaults(fn=cmd_budget)

    p = sub.add_parser("littles", help="packet-buffer bytes via Little's law")
    p.add_argument("rate_gbps", type=float)
    p.add_argument("latency_ns", type=float)
    p.set_defaults(fn=cmd_littles)

    p = sub.add_parser("validate", help="validate a config file")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
