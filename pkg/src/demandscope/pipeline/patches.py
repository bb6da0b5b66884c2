"""Georeferenced rasters, patch extraction and the pre-electrification image rule."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import NoEligibleImage, OutOfBounds, ValidationError
from ..imaging import read_geotiff, read_png, rasterize_polygons
from .records import STABLE_AFTER_MONTHS, parse_month

PATCH_SIZE = 128


@dataclass(frozen=True)
class Raster:
    """RGB raster on an equirectangular grid; ``origin`` is the north-west corner."""

    name: str
    pixels: np.ndarray
    origin: tuple[float, float]
    pixel_size: tuple[float, float]
    acquisition_month: int
    meters_per_pixel: float = 0.5

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[:2]

    def pixel_of(self, lon: float, lat: float) -> tuple[int, int]:
        """(row, col) of the pixel containing a point."""
        col = math.floor((lon - self.origin[0]) / self.pixel_size[0])
        row = math.floor((self.origin[1] - lat) / self.pixel_size[1])
        return row, col

    def contains(self, lon: float, lat: float) -> bool:
        r, c = self.pixel_of(lon, lat)
        h, w = self.shape
        return 0 <= r < h and 0 <= c < w

    def to_pixels(self, ring: np.ndarray) -> np.ndarray:
        """lon/lat ring -> (x, y) pixel coordinates."""
        ring = np.asarray(ring, dtype=np.float64)
        return np.column_stack([(ring[:, 0] - self.origin[0]) / self.pixel_size[0],
                                (self.origin[1] - ring[:, 1]) / self.pixel_size[1]])


@dataclass(frozen=True)
class ImagePatch:
    pixels: np.ndarray  # (size, size, 3) uint8
    resolution: float
    acquisition_month: int
    geo_anchor: tuple[float, float]
    origin_px: tuple[int, int] = (0, 0)  # raster (row, col) of the patch's top-left pixel


def load_raster(path) -> Raster:
    """GeoTIFF (georeferencing from tags) or PNG; both need a JSON sidecar."""
    path = Path(path)
    side_path = path.with_suffix(".json")
    if not side_path.exists():
        raise ValidationError(f"{path}: missing sidecar {side_path.name}")
    side = json.loads(side_path.read_text())
    if path.suffix.lower() in (".tif", ".tiff"):
        pixels, origin, psize = read_geotiff(path)
    else:
        pixels = read_png(path)
        try:
            origin, psize = tuple(side["origin"]), tuple(side["pixel_size_deg"])
        except KeyError as exc:
            raise ValidationError(f"{side_path}: PNG sidecar needs origin and pixel_size_deg") from exc
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ValidationError(f"{path}: expected an RGB raster, got shape {pixels.shape}")
    return Raster(path.stem, pixels, (float(origin[0]), float(origin[1])), (float(psize[0]), float(psize[1])),
                  parse_month(side["acquisition_month"]), float(side.get("meters_per_pixel", 0.5)))


def load_raster_dir(directory) -> list[Raster]:
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".png", ".tif", ".tiff"))
    return [load_raster(p) for p in files]


def extract_patch(raster: Raster, lon: float, lat: float, size: int = PATCH_SIZE) -> ImagePatch:
    """Patch whose pixel ``(size//2, size//2)`` is the pixel containing the point."""
    row, col = raster.pixel_of(lon, lat)
    half = size // 2
    h, w = raster.shape
    r0, c0 = row - half, col - half
    if r0 < 0 or c0 < 0 or r0 + size > h or c0 + size > w:
        raise OutOfBounds(f"({lon}, {lat}) is within {half} px of the edge of raster {raster.name}")
    pix = np.ascontiguousarray(raster.pixels[r0:r0 + size, c0:c0 + size])
    return ImagePatch(pix, raster.meters_per_pixel, raster.acquisition_month, (lon, lat), (r0, c0))


class ImageIndex:
    """Location lookup over a set of non-overlapping rasters (one image per location)."""

    def __init__(self, rasters: list[Raster]):
        self.rasters = list(rasters)

    def find(self, lon: float, lat: float) -> Raster | None:
        for r in self.rasters:
            if r.contains(lon, lat):
                return r
        return None


def match_pre_electrification_patch(
    lon: float,
    lat: float,
    connection_month: int,
    index: ImageIndex,
    size: int = PATCH_SIZE,
    strict: bool = False,
) -> ImagePatch:
    """Patch from an image acquired before the stable-consumption window opens.

    The default accepts images up to 12 months after connection; ``strict``
    accepts only images dated before the connection month.
    """
    raster = index.find(lon, lat)
    if raster is None:
        raise NoEligibleImage(f"no image covers ({lon}, {lat})")
    cutoff = connection_month if strict else connection_month + STABLE_AFTER_MONTHS
    if raster.acquisition_month >= cutoff:
        raise NoEligibleImage(f"image {raster.name} is dated after the eligibility cutoff")
    return extract_patch(raster, lon, lat, size)


def footprint_mask(raster: Raster, rings: list[np.ndarray], r0: int = 0, c0: int = 0, size: int | None = None) -> np.ndarray:
    """Rasterize lon/lat footprint rings over a raster window (pixel-centre rule)."""
    h, w = raster.shape if size is None else (size, size)
    polys = [raster.to_pixels(ring) - np.array([c0, r0]) for ring in rings]
    return rasterize_polygons(polys, h, w)
