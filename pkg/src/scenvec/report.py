"""CSV row files, Markdown tables in the layout of the ADE/MAE result tables, and SVG overlays."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from scenvec.metrics import METRIC_UNITS
from scenvec.scenario_model import ScenarioKind

KIND_LABEL = {ScenarioKind.ACC: "ACC", ScenarioKind.LK: "LK", ScenarioKind.ACC_AND_LK: "ACC&LK"}

ADE_COLUMNS = [f"ADE_{KIND_LABEL[k]} [m]" for k in ScenarioKind]
COUNT_COLUMNS = ["N_ACC", "N_LK", "N_ACC&LK"]


def mae_column(kind: ScenarioKind, metric: str) -> str:
    return f"MAE_{KIND_LABEL[kind]}_{metric} [{METRIC_UNITS[metric]}]"


def write_row(path, row: Mapping[str, object]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: _fmt(v) for k, v in row.items()})


def write_rows(path, rows: Sequence[Mapping[str, object]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def read_rows(path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _fmt(value) -> str:
    if isinstance(value, float):
        return "nan" if math.isnan(value) else repr(value)
    return str(value)


def _num(text: str, digits: int = 2) -> str:
    try:
        value = float(text)
    except (TypeError, ValueError):
        return text or "n/a"
    return "n/a" if math.isnan(value) else f"{value:.{digits}f}"


def markdown_table(header: Sequence[str], rows: Iterable[Sequence[str]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines)


def ade_table(rows: Sequence[Mapping[str, str]]) -> str:
    """ADE per mix and test pool; rows sharing a mix label are kept and annotated with their seed."""
    labels = [tuple(r.get(c, "") for c in COUNT_COLUMNS) for r in rows]
    body = []
    for r, label in zip(rows, labels):
        row_id = r.get("row", "")
        if labels.count(label) > 1:
            row_id = f"{row_id} (dup, seed {r.get('init_seed', '?')})"
        body.append([row_id, *label, *(_num(r.get(c, "")) for c in ADE_COLUMNS)])
    return markdown_table(["Row", *COUNT_COLUMNS, *ADE_COLUMNS], body)


def mae_table(rows: Sequence[Mapping[str, str]]) -> str:
    """Scenario, metric and MAE per model family."""
    body = [[r["scenario"], r["metric"], _num(r["MAE_ET"]), _num(r["MAE_mean"]), _num(r["MAE_predictor"]), r["unit"]]
            for r in rows]
    return markdown_table(["Scenario", "Evaluation metric", "MAE ET", "MAE mean", "MAE predictor", "Unit"], body)


def metadata_table(rows: Sequence[Mapping[str, str]], keys: Sequence[str], digits: Optional[int] = None) -> str:
    def cell(value):
        return value if digits is None else _num(value, digits)

    body = [[r.get("row", ""), *(cell(r.get(k, "")) for k in keys)] for r in rows]
    return markdown_table(["Row", *keys], body)


def trajectory_svg(path, lanes_xy: Sequence[np.ndarray], series: Mapping[str, np.ndarray],
                   title: Optional[str] = None, width: int = 640, height: int = 320) -> None:
    """Polyline drawing of lane boundaries (gray) and named trajectories."""
    colours = ["#1f77b4", "#9467bd", "#d62728", "#2ca02c", "#ff7f0e"]
    all_pts = np.concatenate([*lanes_xy, *series.values()])
    lo, hi = all_pts.min(axis=0), all_pts.max(axis=0)
    span = np.maximum(hi - lo, 1e-6)
    scale = min((width - 40) / span[0], (height - 40) / span[1])

    def to_px(pts):
        px = 20 + (pts[:, 0] - lo[0]) * scale
        py = height - 20 - (pts[:, 1] - lo[1]) * scale
        return " ".join(f"{x:.1f},{y:.1f}" for x, y in zip(px, py))

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(f'<text x="10" y="14" font-size="12">{title}</text>')
    for lane in lanes_xy:
        parts.append(f'<polyline points="{to_px(lane)}" fill="none" stroke="#999" stroke-width="1"/>')
    for i, (name, pts) in enumerate(series.items()):
        c = colours[i % len(colours)]
        parts.append(f'<polyline points="{to_px(pts)}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        parts.append(f'<text x="{width - 120}" y="{16 + 14 * i}" font-size="11" fill="{c}">{name}</text>')
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
