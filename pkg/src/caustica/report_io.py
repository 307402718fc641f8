"""Deterministic report emission: JSON, CSV and dependency-free SVG plots.

Reports must be bit-stable under a fixed seed and configuration, so nothing
here writes timestamps, machine names or nondeterministic ordering; floats go
through repr (shortest round-trip form).
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

SCHEMA = "caustica-report/1"


def _plain(value):
    """Coerce numpy scalars and arrays to JSON-friendly builtins."""
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def report_to_json(report) -> str:
    payload = {
        "schema": SCHEMA,
        "id": report.id,
        "config": report.config,
        "data": report.data,
        "fits": report.fits,
        "pass": report.passes,
        "ops": sorted(report.ops),
        "wall_time_s": report.wall_time_s,
    }
    if getattr(report, "error", None):
        payload["error"] = report.error
    return json.dumps(payload, sort_keys=True, indent=2, default=_plain) + "\n"


def data_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        buf.write("\n")
        return buf.getvalue()
    header: list[str] = []
    for row in rows:
        for key in row:
            if key not in header:
                header.append(key)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(row.get(k)) for k in header])
    return buf.getvalue()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (np.floating, float)):
        return repr(float(value))
    if isinstance(value, (np.integer, np.bool_)):
        return int(value)
    return value


def csv_to_rows(text: str) -> list[dict]:
    """Inverse of data_to_csv for numeric/text cells."""
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        return []
    reader = csv.reader(lines)
    header = next(reader)
    rows = []
    for rec in reader:
        row = {}
        for key, cell in zip(header, rec):
            if cell == "":
                row[key] = None
                continue
            try:
                row[key] = int(cell)
            except ValueError:
                try:
                    row[key] = float(cell)
                except ValueError:
                    row[key] = cell
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# minimal SVG line plots
# ---------------------------------------------------------------------------

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 30, 50
_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf"]


def _transform(vals, lo, hi, out_lo, out_hi, logscale):
    if logscale:
        vals = [math.log10(v) for v in vals]
        lo, hi = math.log10(lo), math.log10(hi)
    if hi <= lo:
        hi = lo + 1.0
    return [out_lo + (v - lo) / (hi - lo) * (out_hi - out_lo) for v in vals]


def svg_plot(series: dict[str, tuple[list, list]], title: str,
             xlabel: str = "", ylabel: str = "",
             loglog: bool = False) -> str:
    """One polyline per named series; log-log axes when requested."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" '
        f'font-family="monospace" font-size="14">{title}</text>',
    ]
    drawable = {name: (xs, ys) for name, (xs, ys) in series.items()
                if len(xs) >= 1 and (not loglog or
                                     (min(xs) > 0 and min(ys) > 0))}
    if drawable:
        all_x = [v for xs, _ in drawable.values() for v in xs]
        all_y = [v for _, ys in drawable.values() for v in ys]
        x_lo, x_hi = min(all_x), max(all_x)
        y_lo, y_hi = min(all_y), max(all_y)
        for idx, (name, (xs, ys)) in enumerate(sorted(drawable.items())):
            px = _transform(xs, x_lo, x_hi, _ML, _W - _MR, loglog)
            py = _transform(ys, y_lo, y_hi, _H - _MB, _MT, loglog)
            pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(px, py))
            color = _COLORS[idx % len(_COLORS)]
            parts.append(f'<polyline points="{pts}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
            parts.append(f'<text x="{_W - _MR - 5}" y="{_MT + 16 * idx + 12}" '
                         f'text-anchor="end" font-family="monospace" '
                         f'font-size="11" fill="{color}">{name}</text>')
        axis_note = "log-log" if loglog else "linear"
        parts.append(f'<text x="{_ML}" y="{_H - 8}" font-family="monospace" '
                     f'font-size="11">x: {xlabel} ({axis_note})</text>')
        parts.append(f'<text x="{_ML}" y="{_H - 24}" font-family="monospace" '
                     f'font-size="11">y: {ylabel}</text>')
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
                 f'y2="{_H - _MB}" stroke="black"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
                 f'stroke="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit(report, formats=("json", "csv", "svg"), out_dir="reports") -> list[Path]:
    """Write the report in the requested formats; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out / f"{report.id}.{fmt}"
        if fmt == "json":
            path.write_text(report_to_json(report))
        elif fmt == "csv":
            path.write_text(data_to_csv(report.data))
        elif fmt == "svg":
            path.write_text(svg_plot(report.plot_series, report.plot_title,
                                     report.plot_xlabel, report.plot_ylabel,
                                     loglog=report.plot_loglog))
        else:
            raise ValueError(f"unknown format {fmt!r}")
        written.append(path)
    return written
