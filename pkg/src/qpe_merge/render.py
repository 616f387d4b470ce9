"""Optional SVG rendering over the emitted CSV artifacts.

The CSV files are the contract; these plots are a convenience. Rendering
is deterministic: fixed canvas sizes, fixed palettes, and fixed coordinate
formatting, so the same inputs always produce byte-identical SVGs.
"""
from __future__ import annotations

import csv
from pathlib import Path

from .errors import DataError
from .ingest import MISSING_TOKEN
from .report import PHASE_WARMUP, product_label

SERIES_COLORS = {
    "gauge": "#222222",
    "merged": "#d62728",
    "mrms": "#2ca02c",
    "imerg_e": "#1f77b4",
    "stage4": "#9467bd",
}
FALLBACK_COLORS = ("#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")

TS_WIDTH, TS_HEIGHT = 960, 320
TS_MARGIN = {"left": 52, "right": 14, "top": 16, "bottom": 34}
SC_SIZE = 420
SC_MARGIN = 46


def _num(x: float) -> str:
    return f"{x:.2f}"


def _color(product: str, column_index: int) -> str:
    return SERIES_COLORS.get(product, FALLBACK_COLORS[column_index % len(FALLBACK_COLORS)])


def _read_csv(path: Path):
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows to render")
    return rows[0], rows[1:]


def _polyline_segments(values):
    """Split a value column on missing entries into drawable runs."""
    segments = []
    run = []
    for i, v in enumerate(values):
        if v is None:
            if len(run) > 1:
                segments.append(run)
            run = []
        else:
            run.append((i, v))
    if len(run) > 1:
        segments.append(run)
    return segments


def render_timeseries(csv_path, svg_path) -> None:
    """Line plot of every series column with fold shading and warm-up marks."""
    csv_path, svg_path = Path(csv_path), Path(svg_path)
    header, rows = _read_csv(csv_path)
    if header[0] != "timestamp" or header[-2:] != ["fold", "phase"]:
        raise DataError(f"{csv_path}: not a rendered-format time-series file")
    series_names = header[1:-2]
    columns = {name: [] for name in series_names}
    folds = []
    phases = []
    for row in rows:
        for name, cell in zip(series_names, row[1:-2]):
            columns[name].append(None if cell == MISSING_TOKEN else float(cell))
        folds.append(int(row[-2]))
        phases.append(row[-1])

    n = len(rows)
    top, bottom = TS_MARGIN["top"], TS_HEIGHT - TS_MARGIN["bottom"]
    left, right = TS_MARGIN["left"], TS_WIDTH - TS_MARGIN["right"]
    vmax = max((v for vals in columns.values() for v in vals if v is not None), default=0.0)
    vmax = vmax if vmax > 0.0 else 1.0

    def sx(i: int) -> float:
        return left + (right - left) * (i / max(n - 1, 1))

    def sy(v: float) -> float:
        return bottom - (bottom - top) * (v / vmax)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{TS_WIDTH}" '
             f'height="{TS_HEIGHT}" viewBox="0 0 {TS_WIDTH} {TS_HEIGHT}">',
             f'<rect width="{TS_WIDTH}" height="{TS_HEIGHT}" fill="#ffffff"/>']

    # Alternating fold background bands, darker where the merged column warms up.
    i = 0
    while i < n:
        j = i
        while j < n and folds[j] == folds[i]:
            j += 1
        if folds[i] % 2 == 1:
            parts.append(f'<rect x="{_num(sx(i))}" y="{top}" '
                         f'width="{_num(sx(j - 1) - sx(i))}" height="{bottom - top}" '
                         f'fill="#f0f0f0"/>')
        i = j
    i = 0
    while i < n:
        j = i
        while j < n and phases[j] == phases[i]:
            j += 1
        if phases[i] == PHASE_WARMUP:
            parts.append(f'<rect x="{_num(sx(i))}" y="{top}" '
                         f'width="{_num(max(sx(j - 1) - sx(i), 1.0))}" '
                         f'height="{bottom - top}" fill="#e0d4d4"/>')
        i = j

    parts.append(f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" '
                 f'stroke="#000000" stroke-width="1"/>')
    parts.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
                 f'stroke="#000000" stroke-width="1"/>')
    for frac in (0.0, 0.5, 1.0):
        v = vmax * frac
        parts.append(f'<text x="{left - 6}" y="{_num(sy(v) + 4)}" font-size="11" '
                     f'text-anchor="end" font-family="monospace">{v:.1f}</text>')
    parts.append(f'<text x="14" y="{(top + bottom) // 2}" font-size="11" '
                 f'text-anchor="middle" font-family="monospace" '
                 f'transform="rotate(-90 14 {(top + bottom) // 2})">mm/h</text>')
    parts.append(f'<text x="{left}" y="{TS_HEIGHT - 10}" font-size="11" '
                 f'font-family="monospace">{rows[0][0]}</text>')
    parts.append(f'<text x="{right}" y="{TS_HEIGHT - 10}" font-size="11" '
                 f'text-anchor="end" font-family="monospace">{rows[-1][0]}</text>')

    for ci, name in enumerate(series_names):
        color = _color(name, ci)
        for segment in _polyline_segments(columns[name]):
            points = " ".join(f"{_num(sx(i))},{_num(sy(v))}" for i, v in segment)
            parts.append(f'<polyline points="{points}" fill="none" stroke="{color}" '
                         f'stroke-width="1"/>')
        lx = left + 8 + ci * 110
        parts.append(f'<line x1="{lx}" y1="{top + 8}" x2="{lx + 18}" y2="{top + 8}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 22}" y="{top + 12}" font-size="11" '
                     f'font-family="monospace">{product_label(name)}</text>')

    parts.append("</svg>")
    svg_path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def render_scatter(csv_path, svg_path) -> None:
    """Square log-log scatter over [-2, 2] with the 1:1 diagonal."""
    csv_path, svg_path = Path(csv_path), Path(svg_path)
    with csv_path.open("r", encoding="utf-8", newline="") as fh:
        all_rows = list(csv.reader(fh))
    if not all_rows or all_rows[0] != ["log10_obs", "log10_pred"]:
        raise DataError(f"{csv_path}: not a log-scatter file")
    rows = all_rows[1:]
    lo, hi = -2.0, 2.0
    inner = SC_SIZE - 2 * SC_MARGIN

    def s(v: float) -> float:
        return SC_MARGIN + inner * (v - lo) / (hi - lo)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{SC_SIZE}" '
             f'height="{SC_SIZE}" viewBox="0 0 {SC_SIZE} {SC_SIZE}">',
             f'<rect width="{SC_SIZE}" height="{SC_SIZE}" fill="#ffffff"/>',
             f'<rect x="{SC_MARGIN}" y="{SC_MARGIN}" width="{inner}" height="{inner}" '
             f'fill="none" stroke="#000000" stroke-width="1"/>',
             f'<line x1="{_num(s(lo))}" y1="{_num(SC_SIZE - s(lo))}" '
             f'x2="{_num(s(hi))}" y2="{_num(SC_SIZE - s(hi))}" '
             f'stroke="#aaaaaa" stroke-width="1"/>']
    for tick in (-2, -1, 0, 1, 2):
        x = s(float(tick))
        parts.append(f'<text x="{_num(x)}" y="{SC_SIZE - SC_MARGIN + 16}" font-size="11" '
                     f'text-anchor="middle" font-family="monospace">{tick}</text>')
        parts.append(f'<text x="{SC_MARGIN - 8}" y="{_num(SC_SIZE - x + 4)}" font-size="11" '
                     f'text-anchor="end" font-family="monospace">{tick}</text>')
    for row in rows:
        ox, py = float(row[0]), float(row[1])
        parts.append(f'<circle cx="{_num(s(ox))}" cy="{_num(SC_SIZE - s(py))}" r="2" '
                     f'fill="#1f77b4" fill-opacity="0.5"/>')
    parts.append(f'<text x="{SC_SIZE // 2}" y="{SC_SIZE - 8}" font-size="12" '
                 f'text-anchor="middle" font-family="monospace">log10 observed</text>')
    parts.append(f'<text x="14" y="{SC_SIZE // 2}" font-size="12" text-anchor="middle" '
                 f'font-family="monospace" transform="rotate(-90 14 {SC_SIZE // 2})">'
                 f'log10 predicted</text>')
    parts.append("</svg>")
    svg_path.write_text("\n".join(parts) + "\n", encoding="utf-8")


def render_run(run_dir, out_dir=None):
    """Render every emitted time-series and scatter CSV under a run directory."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir / "plots"
    ts_dir = run_dir / "timeseries"
    sc_dir = run_dir / "scatter"
    if not ts_dir.is_dir() and not sc_dir.is_dir():
        raise DataError(f"{run_dir}: no timeseries/ or scatter/ directory to render")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if ts_dir.is_dir():
        for path in sorted(ts_dir.glob("*.csv")):
            target = out_dir / f"timeseries_{path.stem}.svg"
            render_timeseries(path, target)
            written.append(target)
    if sc_dir.is_dir():
        for path in sorted(sc_dir.glob("*.csv")):
            target = out_dir / f"scatter_{path.stem}.svg"
            render_scatter(path, target)
            written.append(target)
    return written
