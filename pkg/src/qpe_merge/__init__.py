"""Gauge-targeted merging of multi-source hourly precipitation estimates.

A single-layer recurrent network learns hourly gauge rates from satellite
and radar inputs under blocked cross-validation, then the held-out
predictions are stitched and verified with standard QPE skill metrics.
"""
from .config import RunConfig, load_config
from .errors import ConfigError, DataError, NumericError, QpeMergeError, UndefinedMetricError
from .folds import FoldSpec, make_folds, stitch_validation, window_anchors
from .ingest import (aggregate_halfhourly_to_hourly, fill_missing_linear, parse_canonical,
                     write_canonical)
from .lstm import (LstmParams, LstmState, Scaler, TrainConfig, backprop_window, fit_scaler,
                   forward_window, init_params, load_params, lstm_cell_forward, predict_series,
                   save_params, train)
from .metrics import ContingencyTable, MetricsReport, evaluate_all
from .pipeline import run_pipeline
from .series import (DEFAULT_FEATURES, GAUGE, IMERG_E, MERGED, MRMS, STAGE4, AlignedDataset,
                     HourlySeries, StationMeta, align)
from .version import __version__

__all__ = [
    "AlignedDataset", "ConfigError", "ContingencyTable", "DataError", "DEFAULT_FEATURES",
    "FoldSpec", "GAUGE", "HourlySeries", "IMERG_E", "LstmParams", "LstmState", "MERGED",
    "MetricsReport", "MRMS", "NumericError", "QpeMergeError", "RunConfig", "Scaler",
    "STAGE4", "StationMeta", "TrainConfig", "UndefinedMetricError", "__version__",
    "aggregate_halfhourly_to_hourly", "align", "backprop_window", "evaluate_all",
    "fill_missing_linear", "fit_scaler", "forward_window", "init_params", "load_config",
    "load_params", "lstm_cell_forward", "make_folds", "parse_canonical", "predict_series",
    "run_pipeline", "save_params", "stitch_validation", "train", "window_anchors",
    "write_canonical",
]
