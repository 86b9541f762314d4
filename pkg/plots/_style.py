"""Shared plumbing for the plot scripts: schema-checked CSV loading and a
common figure style.  These scripts are pure file-to-file transformations
over the simulator's CSV outputs; they never import the simulator."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
GRID_KW = dict(alpha=0.3, linewidth=0.6)


class SchemaError(ValueError):
    """CSV is missing, empty, or from a different schema version."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    schema: str            # required `# schema=...` tag of the input CSV
    columns: tuple[str, ...]


def load_rows(path: Path | str, spec: FigureSpec) -> list[dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path}: no such CSV")
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# schema={spec.schema}":
            raise SchemaError(
                f"{path}: expected schema {spec.schema!r}, found {first!r}"
            )
        reader = csv.DictReader(fh)
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    missing = [c for c in spec.columns if c not in rows[0]]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    return rows


def new_figure(ncols: int = 1, width: float = 4.2, height: float = 3.2):
    fig, axes = plt.subplots(1, ncols, figsize=(width * ncols, height))
    return fig, axes


def finish(fig, out_path: Path | str) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(out_path)  # suffix picks the backend; .pdf stays vector
    plt.close(fig)
    return out_path


def run_script(render_fn, argv: list[str], csv_name: str, out_name: str) -> int:
    """Standard `<script> <csv_dir> <out_dir>` entry point."""
    if len(argv) != 3:
        print(f"usage: {argv[0]} <csv_dir> <out_dir>")
        return 1
    try:
        fig = render_fn(Path(argv[1]) / csv_name)
    except SchemaError as exc:
        print(f"schema error: {exc}")
        return 2
    finish(fig, Path(argv[2]) / out_name)
    print(f"wrote {Path(argv[2]) / out_name}")
    return 0
