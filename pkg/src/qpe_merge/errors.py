"""Exception hierarchy shared across the pipeline.

Exit-code mapping lives in the CLI: ConfigError -> 1, DataError -> 2,
NumericError -> 3.
"""


class QpeMergeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(QpeMergeError):
    """Invalid run configuration (structure, missing keys, bad values)."""


class DataError(QpeMergeError):
    """Malformed or inconsistent input data."""


class NumericError(QpeMergeError):
    """Non-finite values encountered during training or prediction."""


class UndefinedMetricError(QpeMergeError):
    """A verification metric is undefined for the given inputs.

    Raised by the low-level metric functions; the evaluation wrapper
    converts it into an explicit per-metric flag instead of a silent 0.
    """
