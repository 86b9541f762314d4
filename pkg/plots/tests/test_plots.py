"""Plot-script tests: well-formed figures from preset-shaped CSVs, schema
mismatch rejection with a nonzero exit, and no simulator dependency."""

import subprocess
import sys
from pathlib import Path

import pytest

PLOTS = Path(__file__).resolve().parents[1]

import inbound
import latency
import outbound
import scaling
import workloads
from _style import SchemaError, finish


def write(path: Path, schema: str, header: str, rows: list[str]) -> Path:
    path.write_text(f"# schema={schema}\n{header}\n" + "\n".join(rows) + "\n")
    return path


@pytest.fixture
def inbound_csv(tmp_path):
    rows = []
    for pkt in (64, 512, 1024):
        for x in (0, 64, 1024):
            rows.append(f"{pkt},{x},16,0,{min(512.0, 32 * pkt * 8 / (x + 8)):.1f},"
                        f"{min(512.0, 32 * pkt * 8 / (x + 8)):.1f},20,{8 + x // 64}")
        rows.append(f"{pkt},0,16,1,260.0,260.0,20,9")
        rows.append(f"{pkt},0,1,0,511.8,512.0,2,2")
    return write(
        tmp_path / "inbound.csv", "pspin-inbound-v1",
        "pkt_bytes,instructions,flows,misaligned,throughput_gbps,bound_gbps,hpus_used,hpus_peak",
        rows,
    )


def test_inbound_series_and_ranges(inbound_csv, tmp_path):
    fig = inbound.render(inbound_csv)
    ax_t, ax_h = fig.axes
    # 3 packet sizes x (curve + bound) + 3 misaligned = 9 lines on the left
    assert len(ax_t.lines) == 9
    assert len(ax_h.lines) == 3
    assert ax_t.get_ylim()[1] >= 512
    assert "Gbit/s" in ax_t.get_ylabel()
    assert "instructions" in ax_t.get_xlabel()
    out = finish(fig, tmp_path / "inbound.pdf")
    assert out.stat().st_size > 1000


def test_outbound_series(tmp_path):
    rows = [
        f"{kind},{src},{pkt},{400.0 if pkt >= 512 else (397.0 if src == 'l2' else 227.0)},400.0"
        for kind in ("pingpong", "hostdma")
        for src in ("l2", "l1")
        for pkt in (64, 512, 1024)
    ]
    csv = write(
        tmp_path / "outbound.csv", "pspin-outbound-v1",
        "kind,src,pkt_bytes,throughput_gbps,goodput_gbps", rows,
    )
    fig = outbound.render(csv)
    assert len(fig.axes) == 2
    for ax in fig.axes:
        assert len(ax.lines) == 2  # from L1 and from L2
        assert ax.get_ylim()[1] >= 500
    finish(fig, tmp_path / "outbound.pdf")


def test_workloads_series(tmp_path):
    names = ("reduce", "aggregate", "filtering", "kvstore", "strided_ddt", "histogram")
    rows = [
        f"{name},{pkt},{100 + 50 * i},1,1"
        for i, name in enumerate(names)
        for pkt in (64, 256, 1024)
    ]
    csv = write(
        tmp_path / "workloads.csv", "pspin-workloads-v1",
        "workload,pkt_bytes,goodput_gbps,hpus_used,hpus_peak,oracle_ok,finished", rows,
    )
    fig = workloads.render(csv)
    assert len(fig.axes[0].lines) == len(names)
    finish(fig, tmp_path / "workloads.pdf")


def test_latency_stacked_breakdown(tmp_path):
    rows = [
        "64,26,3,12,1,7,0,1,2",
        "512,33,3,19,1,7,0,1,2",
        "1024,41,3,27,1,7,0,1,2",
    ]
    csv = write(
        tmp_path / "latency.csv", "pspin-latency-v1",
        "pkt_bytes,latency_ns,her_to_cched_ns,dma_ns,assign_ns,invoke_ns,"
        "handler_ns,doorbell_ns,feedback_ns", rows,
    )
    fig = latency.render(csv)
    ax = fig.axes[0]
    assert len(ax.patches) == 7 * 3  # 7 stages x 3 sizes
    assert "ns" in ax.get_ylabel()
    finish(fig, tmp_path / "latency.pdf")


def test_scaling_lines_and_markers(tmp_path):
    rows = []
    for rate in (200, 400, 800):
        for lat in range(0, 3001, 500):
            rows.append(f"buffer_bytes,{rate},{lat},,,{rate * lat / 8:.0f}")
    rows.append("hct_ns,400.0,,1024,32,655.36")
    for pkt in (64, 256, 1024):
        rows.append(f"budget_ns,400,,{pkt},32,{32 * pkt * 8 / 400:.2f}")
    csv = write(
        tmp_path / "scaling.csv", "pspin-scaling-v1",
        "kind,rate_gbps,latency_ns,pkt_bytes,hpus,value", rows,
    )
    fig = scaling.render(csv)
    ax_b, ax_h = fig.axes
    assert len(ax_b.lines) == 4  # 3 rate curves + 1 HCT marker
    assert len(ax_h.lines) == 1
    assert "KiB" in ax_b.get_ylabel()
    finish(fig, tmp_path / "scaling.pdf")


def test_schema_mismatch_raises(tmp_path):
    bad = write(tmp_path / "inbound.csv", "pspin-inbound-v999",
                "pkt_bytes,instructions,flows,misaligned,throughput_gbps,"
                "bound_gbps,hpus_used,hpus_peak", ["64,0,16,0,1,1,1,1"])
    with pytest.raises(SchemaError, match="schema"):
        inbound.render(bad)


def test_empty_csv_raises(tmp_path):
    empty = write(tmp_path / "workloads.csv", "pspin-workloads-v1",
                  "workload,pkt_bytes,goodput_gbps,hpus_used,hpus_peak,oracle_ok,finished", [])
    with pytest.raises(SchemaError, match="no data rows"):
        workloads.render(empty)


def test_missing_column_raises(tmp_path):
    csv = write(tmp_path / "outbound.csv", "pspin-outbound-v1",
                "kind,src,pkt_bytes", ["pingpong,l1,64"])
    with pytest.raises(SchemaError, match="missing columns"):
        outbound.render(csv)


def test_cli_nonzero_exit_on_schema_mismatch(tmp_path):
    (tmp_path / "latency.csv").write_text("# schema=wrong-v0\nx\n1\n")
    proc = subprocess.run(
        [sys.executable, str(PLOTS / "latency.py"), str(tmp_path), str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert "schema error" in proc.stdout


def test_cli_renders_vector_figure(tmp_path):
    rows = ["64,26,3,12,1,7,0,1,2", "1024,41,3,27,1,7,0,1,2"]
    write(
        tmp_path / "latency.csv", "pspin-latency-v1",
        "pkt_bytes,latency_ns,her_to_cched_ns,dma_ns,assign_ns,invoke_ns,"
        "handler_ns,doorbell_ns,feedback_ns", rows,
    )
    out = tmp_path / "figs"
    proc = subprocess.run(
        [sys.executable, str(PLOTS / "latency.py"), str(tmp_path), str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    pdf = out / "latency.pdf"
    assert pdf.exists() and pdf.read_bytes().startswith(b"%PDF")


def test_scripts_do_not_import_simulator():
    for script in ("inbound", "outbound", "workloads", "latency", "scaling", "_style"):
        text = (PLOTS / f"{script}.py").read_text()
        assert "pspin_sim" not in text
