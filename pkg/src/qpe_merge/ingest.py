"""Canonical CSV ingest: parsing, half-hourly aggregation, gap filling.

Canonical file contract (one file per station/product pair):

    line 1:    # station=<id> product=<name> step_minutes=<30|60> unit=mm/h
    line 2:    timestamp,value
    data rows: YYYY-MM-DDTHH:MM:SSZ,<decimal or NA>

Values are rates in mm/h; the literal token ``NA`` marks a missing record.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from .errors import DataError
from .series import HourlySeries

HEADER_RE = re.compile(r"^# station=(\S+) product=(\S+) step_minutes=(30|60) unit=mm/h$")
TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%SZ"
COLUMNS_LINE = "timestamp,value"
MISSING_TOKEN = "NA"


@dataclass(frozen=True)
class RawSeries:
    """A parsed canonical file at its native cadence (30 or 60 minutes)."""

    station_id: str
    product: str
    step_minutes: int
    start: datetime
    values: np.ndarray
    missing: np.ndarray

    def __len__(self) -> int:
        return int(self.values.size)

    def as_hourly(self) -> HourlySeries:
        if self.step_minutes != 60:
            raise DataError(f"{self.station_id}/{self.product}: cadence is "
                            f"{self.step_minutes} min, aggregate before use")
        return HourlySeries(self.station_id, self.product, self.start, self.values, self.missing)


def parse_canonical(path) -> RawSeries:
    """Parse one canonical CSV file, validating the full format contract."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    m = HEADER_RE.match(lines[0])
    if m is None:
        raise DataError(f"{path}: malformed header line {lines[0]!r}")
    station_id, product, step_str = m.group(1), m.group(2), m.group(3)
    step = timedelta(minutes=int(step_str))
    if len(lines) < 2 or lines[1] != COLUMNS_LINE:
        raise DataError(f"{path}: expected column line {COLUMNS_LINE!r}")
    rows = lines[2:]
    if not rows:
        raise DataError(f"{path}: no data rows")

    values = np.empty(len(rows), dtype=np.float64)
    missing = np.zeros(len(rows), dtype=bool)
    prev_ts = None
    start = None
    for i, row in enumerate(rows):
        ts_token, _, value_token = row.partition(",")
        if not value_token:
            raise DataError(f"{path}:{i + 3}: expected 'timestamp,value', got {row!r}")
        try:
            ts = datetime.strptime(ts_token, TIMESTAMP_FMT).replace(tzinfo=timezone.utc)
        except ValueError as exc:
            raise DataError(f"{path}:{i + 3}: bad timestamp {ts_token!r}") from exc
        if prev_ts is not None:
            if ts <= prev_ts:
                raise DataError(f"{path}:{i + 3}: non-monotone timestamps "
                                f"({ts_token} after {prev_ts.strftime(TIMESTAMP_FMT)})")
            if ts - prev_ts != step:
                raise DataError(f"{path}:{i + 3}: irregular spacing "
                                f"({ts - prev_ts} instead of {step})")
        else:
            start = ts
        prev_ts = ts
        if value_token == MISSING_TOKEN:
            values[i] = np.nan
            missing[i] = True
            continue
        try:
            v = float(value_token)
        except ValueError as exc:
            raise DataError(f"{path}:{i + 3}: bad value {value_token!r}") from exc
        if not np.isfinite(v):
            raise DataError(f"{path}:{i + 3}: non-finite value {value_token!r}")
        if v < 0.0:
            raise DataError(f"{path}:{i + 3}: negative value {value_token!r}")
        values[i] = v

    return RawSeries(station_id, product, int(step_str), start, values, missing)


def aggregate_halfhourly_to_hourly(raw: RawSeries) -> HourlySeries:
    """Mean-of-rates aggregation of a 30-minute series to hourly.

    Rates are in mm/h, so the mean of the two half-hour rates preserves the
    hour's accumulation. An hour with either half missing is marked missing.
    """
    if raw.step_minutes != 30:
        raise DataError(f"{raw.station_id}/{raw.product}: expected 30-minute cadence, "
                        f"got {raw.step_minutes}")
    if len(raw) % 2 != 0:
        raise DataError(f"{raw.station_id}/{raw.product}: odd number of half-hour records "
                        f"({len(raw)})")
    if raw.start.minute != 0 or raw.start.second != 0:
        raise DataError(f"{raw.station_id}/{raw.product}: half-hourly series must start "
                        f"on a top-of-hour boundary, got {raw.start.isoformat()}")
    pair_values = raw.values.reshape(-1, 2)
    pair_missing = raw.missing.reshape(-1, 2)
    hourly_missing = pair_missing.any(axis=1)
    # NaN at missing slots propagates through the mean; mask carries the state.
    hourly_values = pair_values.mean(axis=1)
    hourly_values[hourly_missing] = np.nan
    return HourlySeries(raw.station_id, raw.product, raw.start, hourly_values, hourly_missing)


def fill_missing_linear(series: HourlySeries) -> HourlySeries:
    """Fill gaps by linear interpolation between nearest present neighbors.

    Leading/trailing gaps take the nearest present value. Present values are
    preserved exactly, so the operation is idempotent.
    """
    if not series.missing.any():
        return series
    known = ~series.missing
    if not known.any():
        raise DataError(f"{series.key()}: cannot interpolate an all-missing series")
    idx = np.arange(len(series), dtype=np.float64)
    filled = series.values.copy()
    filled[series.missing] = np.interp(idx[series.missing], idx[known], series.values[known])
    return HourlySeries(series.station_id, series.product, series.start, filled)


def gap_stats(series_or_raw) -> dict:
    """Missing-data statistics for a series, computed before gap filling."""
    missing = np.asarray(series_or_raw.missing, dtype=bool)
    n = int(missing.size)
    n_missing = int(missing.sum())
    longest = run = gaps = 0
    for flag in missing:
        if flag:
            run += 1
            longest = max(longest, run)
        else:
            if run:
                gaps += 1
            run = 0
    if run:
        gaps += 1
    leading = 0
    while leading < n and missing[leading]:
        leading += 1
    trailing = 0
    while trailing < n and missing[n - 1 - trailing]:
        trailing += 1
    return {
        "n": n,
        "n_missing": n_missing,
        "n_gaps": gaps,
        "longest_gap": longest,
        "leading_gap": leading if n_missing else 0,
        "trailing_gap": trailing if n_missing else 0,
    }


def format_value(v: float) -> str:
    """Shortest decimal representation that round-trips through float()."""
    return repr(float(v))


def write_canonical(path, series) -> None:
    """Write an HourlySeries or RawSeries in the canonical CSV format."""
    path = Path(path)
    step = getattr(series, "step_minutes", 60)
    delta = timedelta(minutes=step)
    lines = [f"# station={series.station_id} product={series.product} "
             f"step_minutes={step} unit=mm/h", COLUMNS_LINE]
    ts = series.start
    for v, miss in zip(series.values, series.missing):
        token = MISSING_TOKEN if miss else format_value(v)
        lines.append(f"{ts.strftime(TIMESTAMP_FMT)},{token}")
        ts = ts + delta
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
