"""Writer for the canonical per-station CSV interchange format.

Exactly the layout the merging pipeline ingests:

    # station=<id> product=<name> step_minutes=<30|60> unit=mm/h
    timestamp,value
    2017-01-01T00:00:00Z,0.5
    2017-01-01T01:00:00Z,NA

Values are non-negative mm/h rates in shortest round-trip notation; missing
timesteps carry the literal token NA. Timestamps are strictly increasing
UTC at the fixed cadence.
"""
from __future__ import annotations

import math
from datetime import datetime, timedelta
from pathlib import Path

from .errors import ConfigError

TIMESTAMP_FMT = "%Y-%m-%dT%H:%M:%SZ"
MISSING_TOKEN = "NA"


def format_value(value: float) -> str:
    return repr(float(value))


def write_canonical(path, station_id: str, product: str, step_minutes: int,
                    start: datetime, values) -> Path:
    """values: iterable of floats, None/NaN meaning missing."""
    if step_minutes not in (30, 60):
        raise ConfigError(f"step_minutes must be 30 or 60, got {step_minutes}")
    lines = [f"# station={station_id} product={product} "
             f"step_minutes={step_minutes} unit=mm/h",
             "timestamp,value"]
    ts = start
    step = timedelta(minutes=step_minutes)
    for value in values:
        if value is None or (isinstance(value, float) and math.isnan(value)):
            token = MISSING_TOKEN
        else:
            token = format_value(value)
        lines.append(f"{ts.strftime(TIMESTAMP_FMT)},{token}")
        ts = ts + step
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
