"""Station list files: CSV with a header containing at least
``id,latitude,longitude`` (extra columns are carried along untouched)."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError


@dataclass(frozen=True)
class Station:
    id: str
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        if not self.id or any(ch.isspace() for ch in self.id):
            raise ConfigError(f"station id {self.id!r} must be non-empty without whitespace")
        if not -90.0 <= self.latitude <= 90.0:
            raise ConfigError(f"station {self.id}: latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 360.0:
            raise ConfigError(f"station {self.id}: longitude {self.longitude} "
                              f"outside [-180, 360]")


def read_stations(path) -> list:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read station file {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: no station rows")
    missing = {"id", "latitude", "longitude"} - set(rows[0])
    if missing:
        raise ConfigError(f"{path}: header is missing columns {sorted(missing)}")
    stations = []
    for lineno, row in enumerate(rows, start=2):
        try:
            stations.append(Station(id=row["id"].strip(),
                                    latitude=float(row["latitude"]),
                                    longitude=float(row["longitude"])))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad station row: {exc}") from exc
    ids = [s.id for s in stations]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate station ids")
    return stations
