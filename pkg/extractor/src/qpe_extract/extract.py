"""Archive-to-CSV conversion: nearest-cell series for every station.

Per-granule work is independent; rows are written in timestamp order
regardless of the order granules are visited. A granule that is absent or
undecodable contributes an NA row for every station (undecodable ones are
logged); a station whose nearest coverage is fully masked gets NA for that
timestep only. A station outside the grid is a setup error and fails the
conversion outright.
"""
from __future__ import annotations

import logging
import math
from datetime import datetime, timedelta, timezone
from pathlib import Path

from .canonical import write_canonical
from .errors import BoundsError, ConfigError, GranuleError, MaskedError
from .granules import PRODUCTS, STEP_MINUTES, index_archive, load_granule
from .grid import extract_point

log = logging.getLogger(__name__)

# Header product names the merging pipeline expects by default; the satellite
# archive flag is plain "imerg" but the early-latency series it carries is
# conventionally labeled "imerg_e" downstream. Overridable per invocation.
OUTPUT_PRODUCT_NAMES = {"mrms": "mrms", "stage4": "stage4", "imerg": "imerg_e"}


def output_product_name(product: str, override=None) -> str:
    return override if override else OUTPUT_PRODUCT_NAMES[product]


def period_timesteps(start: datetime, end: datetime, step_minutes: int) -> list:
    """Granule start times in [start, end), at the product cadence."""
    if start.tzinfo is None or end.tzinfo is None:
        raise ConfigError("period bounds must be timezone-aware UTC")
    start = start.astimezone(timezone.utc)
    end = end.astimezone(timezone.utc)
    if not end > start:
        raise ConfigError(f"period end {end} is not after start {start}")
    step = timedelta(minutes=step_minutes)
    if (end - start) % step:
        raise ConfigError(f"period length is not a whole number of "
                          f"{step_minutes}-minute steps")
    if start.minute % step_minutes or start.second or start.microsecond:
        raise ConfigError(f"period start {start} is not aligned to "
                          f"{step_minutes}-minute steps")
    out = []
    ts = start
    while ts < end:
        out.append(ts)
        ts = ts + step
    return out


def convert_archive(in_dir, stations, product: str, start: datetime, end: datetime,
                    out_dir, product_name: str = None) -> dict:
    """Extract every station's series over [start, end); returns a summary.

    Emits one canonical CSV per station named ``<id>_<product name>.csv``.
    """
    if product not in PRODUCTS:
        raise ConfigError(f"unknown product {product!r} (expected one of {PRODUCTS})")
    if not stations:
        raise ConfigError("no stations to extract")
    step_minutes = STEP_MINUTES[product]
    name = output_product_name(product, product_name)
    timesteps = period_timesteps(start, end, step_minutes)
    archive = index_archive(in_dir, product)

    columns = {s.id: [] for s in stations}
    n_absent = n_corrupt = n_masked = 0
    for ts in timesteps:
        path = archive.get(ts)
        if path is None:
            n_absent += 1
            for s in stations:
                columns[s.id].append(None)
            continue
        try:
            fld = load_granule(path, product)
        except GranuleError as exc:
            log.warning("skipping granule %s: %s", path.name, exc)
            n_corrupt += 1
            for s in stations:
                columns[s.id].append(None)
            continue
        for s in stations:
            try:
                value = extract_point(fld, s.latitude, s.longitude)
            except MaskedError:
                log.warning("%s @ %s: coverage fully masked", s.id, ts.isoformat())
                n_masked += 1
                value = None
            except BoundsError as exc:
                raise ConfigError(f"station {s.id} is outside the {product} grid: "
                                  f"{exc}") from exc
            if value is not None and not math.isfinite(value):
                value = None
            columns[s.id].append(value)

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {}
    for s in stations:
        target = out_dir / f"{s.id}_{name}.csv"
        write_canonical(target, s.id, name, step_minutes, timesteps[0], columns[s.id])
        files[s.id] = target
    present = len(timesteps) - n_absent
    log.info("%s: %d timesteps (%d granules present, %d absent, %d undecodable), "
             "%d station files", product, len(timesteps), present, n_absent,
             n_corrupt, len(files))
    return {
        "product": product,
        "product_name": name,
        "step_minutes": step_minutes,
        "timesteps": len(timesteps),
        "granules_present": present,
        "granules_absent": n_absent,
        "granules_undecodable": n_corrupt,
        "masked_samples": n_masked,
        "files": {sid: str(p) for sid, p in files.items()},
    }
