"""Verification metrics: CC, RMSE, relative bias, POD, FAR.

Continuous metrics compare estimate p against observation o elementwise;
categorical metrics threshold both series into events (value > threshold)
and count the contingency cells. Metrics that are undefined for the given
inputs raise UndefinedMetricError; `evaluate_all` converts that into an
explicit flag so reports never show a silent 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError, UndefinedMetricError
from .series import HourlySeries

METRIC_NAMES = ("cc", "rmse", "rb_percent", "pod", "far")


@dataclass(frozen=True)
class ContingencyTable:
    """Event counts at a threshold: hits, misses, false alarms, correct negatives."""

    hits: int
    misses: int
    false_alarms: int
    correct_negatives: int
    threshold: float

    @property
    def n(self) -> int:
        return self.hits + self.misses + self.false_alarms + self.correct_negatives

    @property
    def observed_events(self) -> int:
        return self.hits + self.misses

    @property
    def predicted_events(self) -> int:
        return self.hits + self.false_alarms


@dataclass(frozen=True)
class MetricsReport:
    """The five verification metrics for one (product, station) pair.

    Undefined metrics are None, with the metric name listed in `undefined`.
    """

    station_id: str
    product: str
    n: int
    threshold: float
    cc: Optional[float]
    rmse: Optional[float]
    rb_percent: Optional[float]
    pod: Optional[float]
    far: Optional[float]
    contingency: ContingencyTable
    undefined: tuple = ()

    def value(self, metric: str) -> Optional[float]:
        if metric not in METRIC_NAMES:
            raise KeyError(metric)
        return getattr(self, metric)


def _check_pair(p, o, min_n: int = 1):
    p = np.asarray(p, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if p.shape != o.shape or p.ndim != 1:
        raise DataError(f"metric inputs must be equal-length vectors, got {p.shape} vs {o.shape}")
    if p.size < min_n:
        raise DataError(f"metric needs at least {min_n} samples, got {p.size}")
    return p, o


def cc(p, o) -> float:
    """Pearson correlation coefficient, two-pass (means, then moments)."""
    p, o = _check_pair(p, o, min_n=2)
    dp = p - p.mean()
    do = o - o.mean()
    sp = float(np.dot(dp, dp))
    so = float(np.dot(do, do))
    if sp == 0.0 or so == 0.0:
        raise UndefinedMetricError("cc undefined: constant input sequence (zero variance)")
    return float(np.dot(dp, do) / np.sqrt(sp * so))


def rmse(p, o) -> float:
    """Root mean square error."""
    p, o = _check_pair(p, o)
    d = p - o
    return float(np.sqrt(np.mean(d * d)))


def relative_bias(p, o) -> float:
    """Total deviation of p from o as a percentage of total o."""
    p, o = _check_pair(p, o)
    total = float(o.sum())
    if total == 0.0:
        raise UndefinedMetricError("relative bias undefined: zero observation total")
    return 100.0 * float((p - o).sum()) / total


def contingency(p, o, threshold: float) -> ContingencyTable:
    """Count hits/misses/false alarms/correct negatives at value > threshold."""
    p, o = _check_pair(p, o)
    pe = p > threshold
    oe = o > threshold
    return ContingencyTable(
        hits=int(np.sum(pe & oe)),
        misses=int(np.sum(~pe & oe)),
        false_alarms=int(np.sum(pe & ~oe)),
        correct_negatives=int(np.sum(~pe & ~oe)),
        threshold=float(threshold),
    )


def pod(t: ContingencyTable) -> float:
    """Probability of detection: hits over observed events."""
    if t.observed_events == 0:
        raise UndefinedMetricError("pod undefined: no observed events")
    return t.hits / t.observed_events


def far(t: ContingencyTable) -> float:
    """False alarm ratio: false alarms over predicted events."""
    if t.predicted_events == 0:
        raise UndefinedMetricError("far undefined: no predicted events")
    return t.false_alarms / t.predicted_events


def miss_ratio(t: ContingencyTable) -> float:
    """Diagnostic M/(H+M), the complement of POD."""
    if t.observed_events == 0:
        raise UndefinedMetricError("miss ratio undefined: no observed events")
    return t.misses / t.observed_events


def evaluate_all(p: HourlySeries, o: HourlySeries, threshold: float) -> MetricsReport:
    """All five metrics on the samples present in both series.

    Positions missing in either series are excluded from every metric
    identically, so reports for different products stay comparable when
    given identical masks.
    """
    if len(p) != len(o) or p.start != o.start:
        raise DataError(f"evaluate_all: series not aligned ({p.key()} vs {o.key()})")
    keep = ~(p.missing | o.missing)
    if not keep.any():
        raise DataError(f"evaluate_all: zero overlapping samples for {p.key()}")
    pv = p.values[keep]
    ov = o.values[keep]

    table = contingency(pv, ov, threshold)
    values = {}
    flagged = []
    for name, fn in (("cc", lambda: cc(pv, ov)),
                     ("rmse", lambda: rmse(pv, ov)),
                     ("rb_percent", lambda: relative_bias(pv, ov)),
                     ("pod", lambda: pod(table)),
                     ("far", lambda: far(table))):
        try:
            values[name] = fn()
        except UndefinedMetricError:
            values[name] = None
            flagged.append(name)

    return MetricsReport(
        station_id=p.station_id,
        product=p.product,
        n=int(keep.sum()),
        threshold=float(threshold),
        contingency=table,
        undefined=tuple(flagged),
        **values,
    )
