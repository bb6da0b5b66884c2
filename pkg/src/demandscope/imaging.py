"""Small image utilities: bilinear resampling, PNG and GeoTIFF I/O, polygon rasterization."""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def bilinear_resize(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Resize an (H, W[, C]) array with half-pixel-centre bilinear sampling (edges clamped)."""
    h, w = img.shape[:2]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    return bilinear_sample(img, ys, xs)


def bilinear_sample(img: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Sample ``img`` on the grid ``ys x xs`` (fractional pixel-centre coordinates)."""
    h, w = img.shape[:2]
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    if img.ndim == 3:
        fy = fy[..., None]
        fx = fx[..., None]
    src = img.astype(np.float64)
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def write_png(path, arr: np.ndarray) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(arr, dtype=np.uint8)).save(path, format="PNG", optimize=False)


def read_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB") if im.mode not in ("L", "RGB") else im).copy()


def write_geotiff(path, rgb: np.ndarray, origin: tuple[float, float], pixel_size: tuple[float, float]) -> None:
    """Write an 8-bit RGB raster as three separate bands with GeoTIFF model tags."""
    import tifffile

    lon0, lat0 = origin
    dlon, dlat = pixel_size
    bands = np.ascontiguousarray(np.moveaxis(np.asarray(rgb, dtype=np.uint8), -1, 0))
    extratags = [
        (33550, "d", 3, (dlon, dlat, 0.0), True),  # ModelPixelScaleTag
        (33922, "d", 6, (0.0, 0.0, 0.0, lon0, lat0, 0.0), True),  # ModelTiepointTag
    ]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    tifffile.imwrite(path, bands, planarconfig="separate", photometric="rgb", extratags=extratags)


def read_geotiff(path) -> tuple[np.ndarray, tuple[float, float], tuple[float, float]]:
    """Return (H x W x 3 uint8, (lon0, lat0), (dlon, dlat))."""
    import tifffile

    with tifffile.TiffFile(path) as tf:
        page = tf.pages[0]
        data = page.asarray()
        scale = page.tags[33550].value
        tie = page.tags[33922].value
    if data.ndim == 3 and data.shape[0] == 3:
        data = np.moveaxis(data, 0, -1)
    return np.ascontiguousarray(data, dtype=np.uint8), (float(tie[3]), float(tie[4])), (float(scale[0]), float(scale[1]))


def points_in_polygon(px: np.ndarray, py: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd rule test of points against a closed ring ``poly`` (N x 2)."""
    inside = np.zeros(px.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        if y1 == y2:
            continue
        crosses = (py >= min(y1, y2)) & (py < max(y1, y2))
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def rasterize_polygons(polys_px: list[np.ndarray], height: int, width: int) -> np.ndarray:
    """Binary mask of pixels whose centres fall inside any polygon (pixel coordinates)."""
    mask = np.zeros((height, width), dtype=np.uint8)
    for poly in polys_px:
        poly = np.asarray(poly, dtype=np.float64)
        c0 = max(int(np.floor(poly[:, 0].min())), 0)
        c1 = min(int(np.ceil(poly[:, 0].max())), width)
        r0 = max(int(np.floor(poly[:, 1].min())), 0)
        r1 = min(int(np.ceil(poly[:, 1].max())), height)
        if c0 >= c1 or r0 >= r1:
            continue
        yy, xx = np.mgrid[r0:r1, c0:c1]
        hit = points_in_polygon(xx + 0.5, yy + 0.5, poly)
        mask[r0:r1, c0:c1] |= hit.astype(np.uint8)
    return mask
