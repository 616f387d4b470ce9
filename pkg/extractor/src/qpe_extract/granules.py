"""Granule archives: file naming, discovery, and decoding into grid fields.

A granule is one timestep of one product. Files are named
``<product>_<YYYYMMDD-HHMMSS><suffix>`` with the timestep's start time in
UTC. Two container layouts are built in:

NPZ (``.npz``) — numpy archive with arrays:
    latitude   1-D cell-center degrees, strictly monotone
    longitude  1-D cell-center degrees, strictly monotone
    values     2-D (lat, lon)
    mask       optional 2-D bool, True = invalid cell
    and optional 0-D entries ``unit`` ("mm/h" rate or "mm" accumulation over
    the granule step) and ``resolution_km``.

HDF5 (``.h5`` / ``.hdf5``) — datasets ``latitude``, ``longitude``,
    ``precipitation`` (2-D, lat x lon) and optional ``mask``; optional root
    attributes ``unit`` and ``resolution_km``. This is the layout used for
    the half-hourly satellite product.

Accumulations are normalized to mm/h using the product cadence; no other
unit handling is attempted. Additional container formats (e.g. a GRIB2
decoder) can be plugged in with ``register_decoder`` without touching the
extraction logic.
"""
from __future__ import annotations

import logging
import zipfile
from datetime import datetime, timezone
from pathlib import Path

import h5py
import numpy as np

from .errors import ConfigError, GranuleError
from .grid import GridField, GridSpec

log = logging.getLogger(__name__)

PRODUCTS = ("mrms", "stage4", "imerg")
STEP_MINUTES = {"mrms": 60, "stage4": 60, "imerg": 30}
DEFAULT_RESOLUTION_KM = {"mrms": 1.0, "stage4": 4.0, "imerg": 11.0}  # 0.1 deg

GRANULE_TIME_FMT = "%Y%m%d-%H%M%S"


def granule_stem(product: str, ts: datetime) -> str:
    return f"{product}_{ts.strftime(GRANULE_TIME_FMT)}"


def _rate_factor(unit, step_minutes: int) -> float:
    unit = "mm/h" if unit is None else str(unit)
    if unit in ("mm/h", "mm/hr"):
        return 1.0
    if unit == "mm":  # accumulation over one step
        return 60.0 / step_minutes
    raise GranuleError(f"unknown unit {unit!r} (expected mm/h, mm/hr, or mm)")


def _build_field(latitude, longitude, values, mask, unit, resolution_km,
                 product: str, path) -> GridField:
    try:
        spec = GridSpec(latitude, longitude,
                        float(resolution_km) if resolution_km is not None
                        else DEFAULT_RESOLUTION_KM[product])
        factor = _rate_factor(unit, STEP_MINUTES[product])
        return GridField(spec, np.asarray(values, dtype=np.float64) * factor, mask)
    except ConfigError as exc:
        raise GranuleError(f"{path}: {exc}") from exc


def decode_npz(path, product: str) -> GridField:
    try:
        with np.load(path) as archive:
            entries = dict(archive)
    except (OSError, ValueError, EOFError, zipfile.BadZipFile) as exc:
        raise GranuleError(f"{path}: cannot read npz archive: {exc}") from exc
    for key in ("latitude", "longitude", "values"):
        if key not in entries:
            raise GranuleError(f"{path}: missing array {key!r}")
    unit = entries.get("unit")
    return _build_field(entries["latitude"], entries["longitude"], entries["values"],
                        entries.get("mask"),
                        None if unit is None else str(unit),
                        entries.get("resolution_km"), product, path)


def decode_hdf5(path, product: str) -> GridField:
    try:
        with h5py.File(path, "r") as fh:
            for key in ("latitude", "longitude", "precipitation"):
                if key not in fh:
                    raise GranuleError(f"{path}: missing dataset {key!r}")
            return _build_field(fh["latitude"][()], fh["longitude"][()],
                                fh["precipitation"][()],
                                fh["mask"][()] if "mask" in fh else None,
                                fh.attrs.get("unit"), fh.attrs.get("resolution_km"),
                                product, path)
    except OSError as exc:
        raise GranuleError(f"{path}: cannot read hdf5 file: {exc}") from exc


DECODERS = {
    ".npz": decode_npz,
    ".h5": decode_hdf5,
    ".hdf5": decode_hdf5,
}


def register_decoder(suffix: str, decoder) -> None:
    """Add a container decoder: decoder(path, product) -> GridField."""
    DECODERS[suffix] = decoder


def load_granule(path, product: str) -> GridField:
    path = Path(path)
    decoder = DECODERS.get(path.suffix.lower())
    if decoder is None:
        raise GranuleError(f"{path}: no decoder for {path.suffix!r} "
                           f"(known: {sorted(DECODERS)})")
    return decoder(path, product)


def index_archive(in_dir, product: str) -> dict:
    """timestep -> path for every decodable-looking granule of a product."""
    in_dir = Path(in_dir)
    if not in_dir.is_dir():
        raise ConfigError(f"input directory {in_dir} does not exist")
    prefix = product + "_"
    found = {}
    for path in sorted(in_dir.iterdir()):
        if not path.is_file() or path.suffix.lower() not in DECODERS:
            continue
        if not path.stem.startswith(prefix):
            continue
        stamp = path.stem[len(prefix):]
        try:
            ts = datetime.strptime(stamp, GRANULE_TIME_FMT).replace(tzinfo=timezone.utc)
        except ValueError:
            log.warning("%s: ignoring file with unparseable timestamp %r", path, stamp)
            continue
        if ts in found:
            log.warning("%s: duplicate granule for %s, keeping %s", path, stamp, found[ts])
            continue
        found[ts] = path
    return found
