"""Non-local multicontinuum upscaling for the dual-continuum diffusion model."""

from nlmc.grid import GridPair, OversampleRegion, build_grid, oversample
from nlmc.media import MediaField, generate_channelized, load_media, partition_continua, save_media

__version__ = "0.1.0"

__all__ = [
    "GridPair",
    "MediaField",
    "OversampleRegion",
    "build_grid",
    "generate_channelized",
    "load_media",
    "oversample",
    "partition_continua",
    "save_media",
]
