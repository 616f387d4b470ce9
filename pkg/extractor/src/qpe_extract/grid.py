"""Rectilinear geographic grids and nearest-cell point extraction.

Cell centers live on monotone 1-D latitude/longitude axes. Nearness is
great-circle: we compare squared 3-D chord lengths between unit vectors,
which orders points exactly like the central angle (the chord is a strictly
increasing function of it on [0, pi]) without any inverse trig. Ties go to
the lower row-major (lat, lon) index.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ConfigError, MaskedError

EARTH_RADIUS_KM = 6371.0


def _check_axis(name: str, axis: np.ndarray, lo: float, hi: float) -> np.ndarray:
    axis = np.array(axis, dtype=np.float64)  # copy: frozen views must not alias input
    if axis.ndim != 1 or axis.size == 0:
        raise ConfigError(f"{name} axis must be a non-empty 1-D array")
    if not np.isfinite(axis).all():
        raise ConfigError(f"{name} axis contains non-finite values")
    if axis.min() < lo or axis.max() > hi:
        raise ConfigError(f"{name} axis outside [{lo}, {hi}] degrees")
    if axis.size > 1:
        steps = np.diff(axis)
        if not (np.all(steps > 0) or np.all(steps < 0)):
            raise ConfigError(f"{name} axis is not strictly monotone")
    axis.setflags(write=False)
    return axis


@dataclass(frozen=True)
class GridSpec:
    """Cell-center axes plus the product's nominal resolution in km."""

    lats: np.ndarray
    lons: np.ndarray
    resolution_km: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "lats", _check_axis("latitude", self.lats, -90.0, 90.0))
        object.__setattr__(self, "lons", _check_axis("longitude", self.lons, -180.0, 360.0))
        if not self.resolution_km > 0.0:
            raise ConfigError(f"nominal resolution must be positive, got {self.resolution_km}")

    @property
    def shape(self) -> tuple:
        return self.lats.size, self.lons.size

    def _margin_deg(self, axis: np.ndarray) -> float:
        """Half the largest cell spacing, so points between the outermost
        center and the grid edge still count as covered."""
        if axis.size > 1:
            return float(np.max(np.abs(np.diff(axis)))) / 2.0
        return self.resolution_km / 111.0 / 2.0  # ~km per degree of latitude

    def contains(self, lat: float, lon: float) -> bool:
        mlat = self._margin_deg(self.lats)
        mlon = self._margin_deg(self.lons)
        return (self.lats.min() - mlat <= lat <= self.lats.max() + mlat
                and self.lons.min() - mlon <= lon <= self.lons.max() + mlon)


@dataclass(frozen=True)
class GridField:
    """One granule's worth of values on a grid; mask marks invalid cells."""

    spec: GridSpec
    values: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.spec.shape:
            raise ConfigError(f"values shape {values.shape} does not match grid "
                              f"{self.spec.shape}")
        mask = self.mask
        mask = np.zeros(values.shape, dtype=bool) if mask is None else np.array(mask, dtype=bool)
        if mask.shape != values.shape:
            raise ConfigError(f"mask shape {mask.shape} does not match grid {self.spec.shape}")
        mask = mask | ~np.isfinite(values)
        values.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)


def _unit_vectors(lats_deg, lons_deg):
    """(..., 3) unit vectors on the sphere for degree coordinates."""
    lat = np.radians(np.asarray(lats_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lons_deg, dtype=np.float64))
    cos_lat = np.cos(lat)
    parts = np.broadcast_arrays(cos_lat * np.cos(lon), cos_lat * np.sin(lon), np.sin(lat))
    return np.stack(parts, axis=-1)


def _chord_sq(spec: GridSpec, lat: float, lon: float) -> np.ndarray:
    """Squared chord distance from (lat, lon) to every cell center,
    after bounds validation."""
    lat, lon = float(lat), float(lon)
    if not (np.isfinite(lat) and np.isfinite(lon)):
        raise BoundsError(f"non-finite point ({lat}, {lon})")
    if not spec.contains(lat, lon):
        raise BoundsError(f"point ({lat}, {lon}) outside grid coverage "
                          f"lat [{spec.lats.min()}, {spec.lats.max()}], "
                          f"lon [{spec.lons.min()}, {spec.lons.max()}]")
    grid_vec = _unit_vectors(spec.lats[:, None], spec.lons[None, :])
    point = _unit_vectors(lat, lon)
    return np.sum((grid_vec - point) ** 2, axis=-1)


def nearest_cell(spec: GridSpec, lat: float, lon: float) -> tuple:
    """(lat index, lon index) of the nearest cell center; the lower
    row-major index wins exact ties (argmin keeps the first minimum)."""
    flat = int(np.argmin(_chord_sq(spec, lat, lon)))
    return flat // spec.lons.size, flat % spec.lons.size


def extract_point(fld: GridField, lat: float, lon: float) -> float:
    """Value of the nearest unmasked cell center in great-circle distance.

    Masked cells never answer; a fully masked field raises instead of
    guessing.
    """
    if fld.mask.all():
        raise MaskedError("every grid cell is masked")
    dist_sq = np.where(fld.mask, np.inf, _chord_sq(fld.spec, lat, lon))
    return float(fld.values.flat[int(np.argmin(dist_sq))])
