"""Shared domain types and time alignment of multi-source hourly series.

All timestamps are UTC and aligned to the top of an hour; values are
precipitation rates in mm/h. Missing positions carry NaN in ``values``
and True in ``missing``. Instances are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

import numpy as np

from .errors import DataError

HOUR = timedelta(hours=1)

# Well-known product names; anything else is treated as a custom product.
GAUGE = "gauge"
IMERG_E = "imerg_e"
STAGE4 = "stage4"
MRMS = "mrms"
MERGED = "merged"

DEFAULT_FEATURES = (IMERG_E, STAGE4)


def _utc_top_of_hour(ts: datetime, what: str) -> datetime:
    if ts.tzinfo is None:
        raise DataError(f"{what}: timestamp must be timezone-aware UTC, got naive {ts!r}")
    ts = ts.astimezone(timezone.utc)
    if ts.minute or ts.second or ts.microsecond:
        raise DataError(f"{what}: timestamp must be aligned to the top of an hour, got {ts.isoformat()}")
    return ts


@dataclass(frozen=True)
class StationMeta:
    """Metadata for one gauge station."""

    id: str
    name: str
    elevation: float
    elevation_unit: str
    latitude: float
    longitude: float
    nearby_city: str = ""

    def __post_init__(self) -> None:
        if not self.id or not self.id.isalnum():
            raise DataError(f"station id must be a short alphanumeric code, got {self.id!r}")
        if not -90.0 <= self.latitude <= 90.0:
            raise DataError(f"station {self.id}: latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise DataError(f"station {self.id}: longitude {self.longitude} outside [-180, 180]")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class HourlySeries:
    """One product's hourly rates (mm/h) at one station, with a missing mask."""

    station_id: str
    product: str
    start: datetime
    values: np.ndarray
    missing: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        if self.missing is None:
            missing = np.zeros(values.shape, dtype=bool)
        else:
            missing = np.asarray(self.missing, dtype=bool).copy()
        if values.ndim != 1:
            raise DataError(f"{self.key()}: values must be one-dimensional")
        if missing.shape != values.shape:
            raise DataError(f"{self.key()}: values and missing mask lengths differ "
                            f"({values.size} vs {missing.size})")
        present = values[~missing]
        if not np.all(np.isfinite(present)):
            raise DataError(f"{self.key()}: non-finite value marked as present")
        if present.size and present.min() < 0.0:
            raise DataError(f"{self.key()}: negative precipitation rate {present.min()}")
        values[missing] = np.nan
        object.__setattr__(self, "start", _utc_top_of_hour(self.start, self.key()))
        object.__setattr__(self, "values", _freeze(values))
        object.__setattr__(self, "missing", _freeze(missing))

    def key(self) -> str:
        return f"{self.station_id}/{self.product}"

    def __len__(self) -> int:
        return int(self.values.size)

    @property
    def end(self) -> datetime:
        """Exclusive end timestamp."""
        return self.start + len(self) * HOUR

    def timestamp_at(self, i: int) -> datetime:
        return self.start + i * HOUR

    def index_of(self, ts: datetime) -> int:
        delta = ts - self.start
        hours = delta // HOUR
        if delta != hours * HOUR:
            raise DataError(f"{self.key()}: {ts.isoformat()} is not on this series' hourly grid")
        return int(hours)

    def slice(self, start: int, stop: int) -> "HourlySeries":
        return HourlySeries(self.station_id, self.product, self.timestamp_at(start),
                            self.values[start:stop], self.missing[start:stop])

    def mask_where(self, extra_missing: np.ndarray) -> "HourlySeries":
        """Copy with additional positions marked missing."""
        extra = np.asarray(extra_missing, dtype=bool)
        if extra.shape != self.missing.shape:
            raise DataError(f"{self.key()}: mask length {extra.size} != series length {len(self)}")
        return HourlySeries(self.station_id, self.product, self.start,
                            self.values, self.missing | extra)


@dataclass(frozen=True)
class AlignedDataset:
    """Time-aligned feature matrix plus gauge target for one station."""

    station_id: str
    start: datetime
    feature_names: tuple
    features: np.ndarray  # (n, n_features)
    target: np.ndarray    # (n,)

    def __post_init__(self) -> None:
        features = np.asarray(self.features, dtype=np.float64).copy()
        target = np.asarray(self.target, dtype=np.float64).copy()
        names = tuple(self.feature_names)
        if features.ndim != 2 or features.shape[1] != len(names):
            raise DataError(f"{self.station_id}: feature matrix shape {features.shape} does not "
                            f"match {len(names)} feature names")
        if target.ndim != 1 or target.size != features.shape[0]:
            raise DataError(f"{self.station_id}: target length {target.size} != feature rows "
                            f"{features.shape[0]}")
        if not (np.all(np.isfinite(features)) and np.all(np.isfinite(target))):
            raise DataError(f"{self.station_id}: aligned dataset contains missing values")
        object.__setattr__(self, "start", _utc_top_of_hour(self.start, self.station_id))
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "features", _freeze(features))
        object.__setattr__(self, "target", _freeze(target))

    def __len__(self) -> int:
        return int(self.target.size)

    def timestamp_at(self, i: int) -> datetime:
        return self.start + i * HOUR

    def column(self, name: str) -> np.ndarray:
        return self.features[:, self.feature_names.index(name)]

    def select(self, names) -> "AlignedDataset":
        """Dataset restricted to the given feature columns (same timeline)."""
        idx = [self.feature_names.index(n) for n in names]
        return AlignedDataset(self.station_id, self.start, tuple(names),
                              self.features[:, idx], self.target)


def align(series_list, target: HourlySeries) -> AlignedDataset:
    """Align feature series and the gauge target onto their common hours.

    The output covers exactly the temporal intersection of all inputs;
    feature column order follows ``series_list`` order. All inputs must be
    fully gap-filled and share the target's station id.
    """
    if not series_list:
        raise DataError("align: need at least one feature series")
    everything = list(series_list) + [target]
    for s in everything:
        if s.station_id != target.station_id:
            raise DataError(f"align: mismatched station ids {s.station_id!r} vs "
                            f"{target.station_id!r}")
        if s.missing.any():
            raise DataError(f"align: residual missing values in {s.key()} "
                            f"({int(s.missing.sum())} positions)")
    start = max(s.start for s in everything)
    end = min(s.end for s in everything)
    if end <= start:
        raise DataError(f"align: empty temporal intersection for station {target.station_id}")
    n = (end - start) // HOUR
    columns = []
    for s in series_list:
        i0 = s.index_of(start)
        columns.append(s.values[i0:i0 + n])
    t0 = target.index_of(start)
    return AlignedDataset(
        station_id=target.station_id,
        start=start,
        feature_names=tuple(s.product for s in series_list),
        features=np.column_stack(columns),
        target=target.values[t0:t0 + n],
    )
