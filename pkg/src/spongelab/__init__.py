"""Sierpinski sponge construction and geometric verification toolkit."""

from .sponge import (
    BoxQ,
    SpongeError,
    SpongeSpec,
    TileId,
    all_removed_boxes,
    contains,
    iter_live_tiles,
    live_tile_count,
    min_separation,
    min_separation_witness,
    removed_boxes,
    scale,
    tile_is_live,
)

__all__ = [
    "BoxQ",
    "SpongeError",
    "SpongeSpec",
    "TileId",
    "all_removed_boxes",
    "contains",
    "iter_live_tiles",
    "live_tile_count",
    "min_separation",
    "min_separation_witness",
    "removed_boxes",
    "scale",
    "tile_is_live",
]

__version__ = "0.1.0"
