"""Minimal line-chart SVG rendering for CSV and JSON histories written by the CLI."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
WIDTH, HEIGHT, MARGIN = 640, 400, 56


def load_table(path) -> list[dict]:
    """Rows from a CLI CSV, or from a curate history JSON (list of per-round records)."""
    p = Path(path)
    if p.suffix == ".json":
        data = json.loads(p.read_text())
        if isinstance(data, dict) and "history" in data:
            data = data["history"]
        return [dict(r) for r in data]
    with open(p, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        conv = {}
        for k, v in r.items():
            try:
                conv[k] = float(v)
            except (TypeError, ValueError):
                conv[k] = v
        out.append(conv)
    return out


def default_axes(rows: list[dict]) -> tuple[str, list[str], str | None]:
    cols = list(rows[0])
    if "round" in cols:
        return "round", [c for c in ("retained_mean", "score_mean", "s_alpha") if c in cols], None
    if "held_out_accuracy" in cols:
        return "ratio", ["held_out_accuracy"], "iterations"
    if "empirical_iou" in cols:
        return "p", ["analytic_iou", "empirical_iou"], None
    numeric = [c for c in cols if isinstance(rows[0][c], (int, float))]
    return numeric[0], numeric[1:], None


def series_from(rows: list[dict], x: str, ys: Sequence[str], group: str | None) -> dict[str, list[tuple[float, float]]]:
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        for y in ys:
            name = y if group is None else f"{y} ({group}={r[group]:g})"
            series.setdefault(name, []).append((float(r[x]), float(r[y])))
    for pts in series.values():
        pts.sort()
    return series


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_svg(series: dict[str, list[tuple[float, float]]], x_label: str, title: str = "") -> str:
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(v):
        return MARGIN + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{_fmt(sx(xv))}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{MARGIN - 6}" y="{_fmt(sy(yv) + 3)}" text-anchor="end" font-size="10">{yv:.3g}</text>')
    out.append(
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 14}" text-anchor="middle" font-size="12">{escape(x_label)}</text>'
    )
    for k, (name, pts) in enumerate(series.items()):
        color = COLORS[k % len(COLORS)]
        path = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in pts)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        ly = MARGIN + 14 * k
        out.append(f'<text x="{WIDTH - MARGIN}" y="{ly}" text-anchor="end" font-size="10" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_file(path, x: str | None = None, ys: Sequence[str] | None = None, group: str | None = None) -> str:
    rows = load_table(path)
    if not rows:
        raise ValueError(f"{path}: no rows to plot")
    dx, dys, dgroup = default_axes(rows)
    x = x or dx
    ys = list(ys) if ys else dys
    group = group if group is not None else dgroup
    return render_svg(series_from(rows, x, ys, group), x, Path(path).name)
