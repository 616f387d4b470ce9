"""Error taxonomy for the extractor.

ConfigError maps to CLI exit 1 (bad invocation or setup), the other
ExtractError subclasses map to exit 2 (problems with the data itself).
"""


class ExtractError(Exception):
    """Base class for everything this package raises on purpose."""


class ConfigError(ExtractError):
    """Invalid station file, period, product, or directory layout."""


class BoundsError(ExtractError):
    """A requested point lies outside the grid's coverage."""


class MaskedError(ExtractError):
    """Every cell that could answer a request is masked out."""


class GranuleError(ExtractError):
    """A granule file is unreadable or structurally wrong."""
