"""Report emission: metric tables, merged time-series files, log-scatter
point sets, and the reproducibility manifest.

Every writer is deterministic: identical inputs produce byte-identical
files. Floats in data files use the shortest round-trip representation;
metric tables round to three decimals.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .ingest import MISSING_TOKEN, TIMESTAMP_FMT, format_value
from .metrics import METRIC_NAMES, MetricsReport
from .series import HOUR, HourlySeries

PRODUCT_LABELS = {
    "merged": "Merged",
    "mrms": "MRMS",
    "imerg_e": "IMERG",
    "stage4": "StageIV",
    "gauge": "Gauge",
}
_CANONICAL_ORDER = ("merged", "mrms", "imerg_e", "stage4")
METRIC_LABELS = {"cc": "CC", "rmse": "RMSE", "rb_percent": "RB (%)",
                 "pod": "POD", "far": "FAR"}
UNDEFINED_CELL = "undef"

PHASE_VALIDATION = "validation"
PHASE_WARMUP = "warmup"


def product_label(product: str) -> str:
    return PRODUCT_LABELS.get(product, product)


def product_order(products):
    """Merged first, then the well-known comparison products, then the rest."""
    known = [p for p in _CANONICAL_ORDER if p in products]
    extra = sorted(p for p in products if p not in _CANONICAL_ORDER)
    return known + extra


def _metric_cell(value) -> str:
    return UNDEFINED_CELL if value is None else f"{value:.3f}"


def emit_metrics_table(reports, csv_path, text_path) -> None:
    """One block per station: metric rows by product columns, 3 decimals.

    The CSV keeps one header and contiguous rows per station; the text file
    mirrors it as aligned blocks for reading.
    """
    if not reports:
        raise DataError("emit_metrics_table: no reports")
    stations = sorted({r.station_id for r in reports})
    by_key = {(r.station_id, r.product): r for r in reports}
    products = product_order({r.product for r in reports})
    labels = [product_label(p) for p in products]

    csv_lines = ["station,metric," + ",".join(labels)]
    text_lines = []
    for station in stations:
        text_lines.append(station)
        widths = [max(len(lbl), 8) for lbl in labels]
        header = "Metric".ljust(8) + "".join(lbl.rjust(w + 2) for lbl, w in zip(labels, widths))
        text_lines.append(header)
        for metric in METRIC_NAMES:
            cells = []
            for product in products:
                r = by_key.get((station, product))
                cells.append("" if r is None else _metric_cell(r.value(metric)))
            csv_lines.append(f"{station},{METRIC_LABELS[metric]}," + ",".join(cells))
            text_lines.append(METRIC_LABELS[metric].ljust(8) +
                              "".join(c.rjust(w + 2) for c, w in zip(cells, widths)))
        text_lines.append("")
    Path(csv_path).write_text("\n".join(csv_lines) + "\n", encoding="utf-8")
    Path(text_path).write_text("\n".join(text_lines).rstrip("\n") + "\n", encoding="utf-8")


def fold_phase_columns(n: int, folds, seq_len: int):
    """Per-timestep fold ownership and warm-up/validation phase labels.

    Each timestep belongs to exactly one fold's held-out block; the first
    seq_len - 1 positions of a block have no full window and are warm-up.
    """
    fold_col = np.full(n, -1, dtype=np.int64)
    phase_col = np.empty(n, dtype=object)
    for spec in folds:
        a, b = spec.test_range
        fold_col[a:b] = spec.fold_index
        phase_col[a:b] = PHASE_VALIDATION
        phase_col[a:min(a + seq_len - 1, b)] = PHASE_WARMUP
    if (fold_col < 0).any():
        raise DataError("fold_phase_columns: folds do not cover the timeline")
    return fold_col, phase_col


def emit_timeseries(path, gauge: HourlySeries, product_series, merged: HourlySeries,
                    folds, seq_len: int) -> None:
    """Per-station CSV: timestamp, gauge, each product, merged, fold, phase.

    All series must share the station timeline; missing values render as NA.
    Values use full round-trip precision so the file reproduces the
    in-memory series exactly.
    """
    columns = [gauge] + list(product_series) + [merged]
    n = len(gauge)
    for s in columns:
        if len(s) != n or s.start != gauge.start:
            raise DataError(f"emit_timeseries: {s.key()} not aligned with gauge timeline")
    fold_col, phase_col = fold_phase_columns(n, folds, seq_len)
    header = ("timestamp," + ",".join(s.product for s in columns) + ",fold,phase")
    lines = [header]
    ts = gauge.start
    for row in range(n):
        cells = [ts.strftime(TIMESTAMP_FMT)]
        for s in columns:
            cells.append(MISSING_TOKEN if s.missing[row] else format_value(s.values[row]))
        cells.append(str(int(fold_col[row])))
        cells.append(str(phase_col[row]))
        lines.append(",".join(cells))
        ts = ts + HOUR
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


LOG_RANGE = (-2.0, 2.0)


def emit_log_scatter(path, p: HourlySeries, o: HourlySeries) -> int:
    """(log10 obs, log10 pred) pairs for co-present samples, kept only when
    both coordinates fall inside [-2, 2] (zeros have no log and drop out).
    Returns the number of points written."""
    if len(p) != len(o) or p.start != o.start:
        raise DataError(f"emit_log_scatter: series not aligned ({p.key()} vs {o.key()})")
    keep = ~(p.missing | o.missing)
    lines = ["log10_obs,log10_pred"]
    count = 0
    lo, hi = LOG_RANGE
    for pv, ov in zip(p.values[keep], o.values[keep]):
        if pv <= 0.0 or ov <= 0.0:
            continue
        lp = np.log10(pv)
        lo10 = np.log10(ov)
        if lo <= lp <= hi and lo <= lo10 <= hi:
            lines.append(f"{format_value(lo10)},{format_value(lp)}")
            count += 1
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return count


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(path, manifest: dict) -> None:
    """JSON with sorted keys: stable byte-for-byte across identical runs."""
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
