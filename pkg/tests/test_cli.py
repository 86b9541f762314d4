import subprocess
import sys

import pytest

from pspin_sim.analysis import handler_budget, hct_markers, littles_buffer
from pspin_sim.cli import main


def test_budget_closed_form():
    assert handler_budget(32, 64, 400) == 40.96
    assert handler_budget(32, 1024, 400) == 655.36


def test_budget_degenerate_inputs():
    with pytest.raises(ValueError):
        handler_budget(32, 64, 0)
    with pytest.raises(ValueError):
        handler_budget(0, 64, 400)


def test_littles_closed_form():
    assert littles_buffer(800, 3000) == 300_000
    assert littles_buffer(400, 0) == 0
    assert littles_buffer(200, 1000) == 25_000


def test_hct_markers_scale_cores_with_rate():
    markers = {(m["rate_gbps"], m["pkt_bytes"]): m for m in hct_markers(32)}
    assert markers[(800.0, 1024)]["hpus"] == 64
    assert markers[(200.0, 256)]["hpus"] == 16


def test_cli_budget_and_littles(capsys):
    assert main(["budget", "32", "64", "400"]) == 0
    assert capsys.readouterr().out.strip() == "40.96"
    assert main(["littles", "800", "3000"]) == 0
    assert capsys.readouterr().out.strip() == "300000"
    assert main(["budget", "32", "64", "0"]) == 1


def test_cli_validate_good_and_bad(tmp_path, capsys):
    good = tmp_path / "good.cfg"
    good.write_text("[pspin]\nnum_clusters = 8\n")
    assert main(["validate", str(good)]) == 0
    assert "64 HPUs" in capsys.readouterr().out

    bad = tmp_path / "bad.cfg"
    bad.write_text("[pspin]\nl1_scratchpad_bytes = 1008640\n")
    assert main(["validate", str(bad)]) == 1

    unknown = tmp_path / "unknown.cfg"
    unknown.write_text("[pspin]\nwarp = 1\n")
    assert main(["validate", str(unknown)]) == 1


def test_cli_run_workload_writes_csvs(tmp_path):
    rc = main(
        [
            "run", "--workload", "synthetic",
            "--param", "n_msgs=8", "--param", "pkts_per_msg=32",
            "--param", "flows=4",
            "--out", str(tmp_path),
        ]
    )
    assert rc == 0
    for name in ("packets.csv", "series.csv", "summary.csv"):
        text = (tmp_path / name).read_text()
        assert text.startswith("# schema=pspin-")


def test_cli_run_trace_file(tmp_path):
    trace_path = tmp_path / "t.trace"
    lines = ["0 00 64 header 0", "0 00 64 payload 0", "0 00 64 payload 1"]
    trace_path.write_text("\n".join(lines) + "\n")
    rc = main(["run", "--trace", str(trace_path), "--out", str(tmp_path / "o")])
    assert rc == 0
    assert (tmp_path / "o" / "packets.csv").exists()


def test_cli_run_rejects_bad_config(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("[pspin]\nnum_clusters = 0\n")
    rc = main(
        ["run", "--workload", "synthetic", "--config", str(bad), "--out", str(tmp_path)]
    )
    assert rc == 1
    assert "violation" in capsys.readouterr().err


def test_cli_deterministic_reruns_byte_identical(tmp_path):
    args = [
        "run", "--workload", "reduce",
        "--param", "n_msgs=8", "--param", "items_per_msg=64",
        "--param", "packet_size=128", "--seed", "42",
    ]
    main(args + ["--out", str(tmp_path / "a")])
    main(args + ["--out", str(tmp_path / "b")])
    for name in ("packets.csv", "series.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_scaling_preset(tmp_path):
    rc = main(["sweep", "scaling", "--out", str(tmp_path)])
    assert rc == 0
    text = (tmp_path / "scaling.csv").read_text()
    assert text.startswith("# schema=pspin-scaling-v1")
    assert "buffer_bytes,800,3000" in text.replace('"', "")


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "pspin_sim.cli", "budget", "32", "512", "400"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip() == "327.68"
