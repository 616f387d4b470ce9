"""Nearest-grid-cell extraction of gridded precipitation archives into the
canonical per-station CSV format consumed by the merging pipeline."""
from .canonical import MISSING_TOKEN, TIMESTAMP_FMT, format_value, write_canonical
from .errors import (BoundsError, ConfigError, ExtractError, GranuleError,
                     MaskedError)
from .extract import (OUTPUT_PRODUCT_NAMES, convert_archive, output_product_name,
                      period_timesteps)
from .granules import (DEFAULT_RESOLUTION_KM, PRODUCTS, STEP_MINUTES, decode_hdf5,
                       decode_npz, granule_stem, index_archive, load_granule,
                       register_decoder)
from .grid import EARTH_RADIUS_KM, GridField, GridSpec, extract_point, nearest_cell
from .stations import Station, read_stations
from .version import __version__

__all__ = [
    "BoundsError", "ConfigError", "DEFAULT_RESOLUTION_KM", "EARTH_RADIUS_KM",
    "ExtractError", "GranuleError", "GridField", "GridSpec", "MISSING_TOKEN",
    "MaskedError", "OUTPUT_PRODUCT_NAMES", "PRODUCTS", "STEP_MINUTES", "Station",
    "TIMESTAMP_FMT", "convert_archive", "decode_hdf5", "decode_npz",
    "extract_point", "format_value", "granule_stem", "index_archive",
    "load_granule", "nearest_cell", "output_product_name", "period_timesteps",
    "read_stations", "register_decoder", "write_canonical", "__version__",
]
