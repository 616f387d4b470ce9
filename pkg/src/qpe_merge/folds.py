"""Blocked k-fold partitioning, calibration subsplits, and stitching.

The timeline is cut into k contiguous blocks; fold i holds out block i as
its test range and calibrates on the rest. The calibration region is split
chronologically into train / calibration-validation index sets.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .series import HOUR, HourlySeries

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldSpec:
    """Index partition for one fold: held-out test block plus calibration splits."""

    fold_index: int
    test_range: tuple          # (start, stop), half-open
    calibration_ranges: tuple  # tuple of (start, stop), chronological
    train_indices: np.ndarray
    cal_val_indices: np.ndarray

    @property
    def test_size(self) -> int:
        return self.test_range[1] - self.test_range[0]


def make_folds(n: int, k: int = 3, ratio: float = 0.7, min_block: int = 1):
    """Partition [0, n) into k contiguous test blocks and build FoldSpecs.

    Block sizes differ by at most one; the remainder goes to the earliest
    blocks. ``min_block`` guards against blocks too short to window over
    (pass the model's sequence length).
    """
    if k < 2:
        raise DataError(f"make_folds: fold count must be >= 2 so every fold "
                        f"keeps calibration data, got {k}")
    if n < k * max(min_block, 1):
        raise DataError(f"make_folds: {n} timesteps cannot form {k} blocks of "
                        f"at least {max(min_block, 1)}")
    base, rem = divmod(n, k)
    folds = []
    start = 0
    for i in range(k):
        size = base + (1 if i < rem else 0)
        test = (start, start + size)
        start += size
        cal_ranges = tuple(r for r in ((0, test[0]), (test[1], n)) if r[1] > r[0])
        cal_indices = np.concatenate([np.arange(a, b) for a, b in cal_ranges])
        train_idx, cal_val_idx = split_calibration(cal_indices, ratio)
        folds.append(FoldSpec(i, test, cal_ranges, train_idx, cal_val_idx))
    return folds


def split_calibration(indices, ratio: float = 0.7):
    """Chronological split: earliest floor(ratio * count) indices train."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise DataError("split_calibration: empty calibration index set")
    if not 0.0 < ratio <= 1.0:
        raise DataError(f"split_calibration: ratio {ratio} outside (0, 1]")
    n_train = int(np.floor(ratio * indices.size))
    if n_train == indices.size:
        log.warning("split_calibration: ratio %.3f leaves no calibration-validation set", ratio)
    return indices[:n_train], indices[n_train:]


def window_anchors(indices, ranges, seq_len: int) -> np.ndarray:
    """Filter anchors to those whose full window fits inside one range.

    An anchor i needs the window [i - seq_len + 1, i] to lie within a single
    calibration interval; windows straddling a boundary would feed test-period
    inputs and are dropped.
    """
    indices = np.asarray(indices, dtype=np.int64)
    keep = np.zeros(indices.shape, dtype=bool)
    for a, b in ranges:
        keep |= (indices - seq_len + 1 >= a) & (indices < b)
    return indices[keep]


def assert_no_leakage(anchors, seq_len: int, test_range) -> None:
    """Reject any training window that intersects the held-out test range."""
    anchors = np.asarray(anchors, dtype=np.int64)
    lo = anchors - seq_len + 1
    bad = (lo < test_range[1]) & (anchors >= test_range[0])
    if bad.any():
        i = int(anchors[bad][0])
        raise DataError(f"window anchored at {i} intersects test range "
                        f"[{test_range[0]}, {test_range[1]})")


def stitch_validation(fold_predictions) -> HourlySeries:
    """Concatenate per-fold held-out predictions into one full-period series.

    Each input must cover exactly its own test block; together the blocks
    must tile the timeline with no gaps or overlaps. Warm-up positions stay
    missing.
    """
    if not fold_predictions:
        raise DataError("stitch_validation: no fold predictions")
    parts = sorted(fold_predictions, key=lambda s: s.start)
    first = parts[0]
    for prev, cur in zip(parts, parts[1:]):
        if cur.station_id != first.station_id or cur.product != first.product:
            raise DataError("stitch_validation: mixed stations or products")
        if cur.start < prev.end:
            raise DataError(f"stitch_validation: overlapping fold coverage at "
                            f"{cur.start.isoformat()}")
        if cur.start > prev.end:
            raise DataError(f"stitch_validation: gap in fold coverage between "
                            f"{prev.end.isoformat()} and {cur.start.isoformat()}")
    return HourlySeries(
        first.station_id,
        first.product,
        first.start,
        np.concatenate([p.values for p in parts]),
        np.concatenate([p.missing for p in parts]),
    )
