"""Single source of the package version (kept importable without metadata)."""

__version__ = "0.1.0"
