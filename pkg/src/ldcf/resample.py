"""Bilinear image resampling.

Output pixel centers map to input coordinates by the half-pixel
convention: yi = (yo + 0.5) * in/out - 0.5, clamped to the image
extent, and the four neighbors are mixed bilinearly.  Results round to
the nearest 8-bit value (ties to even).  This fixed convention is part
of the reproducibility contract for multiscale detection.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .imgio import Image


def _axis_coords(n_out: int, n_in: int):
    c = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    c = np.clip(c, 0.0, n_in - 1.0)
    lo = np.floor(c).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = c - lo
    return lo, hi, frac


def resize_plane(plane: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of one float plane."""
    if out_h < 1 or out_w < 1:
        raise ConfigError(f"output size must be positive, got {out_h}x{out_w}")
    y0, y1, fy = _axis_coords(out_h, plane.shape[0])
    x0, x1, fx = _axis_coords(out_w, plane.shape[1])
    fy = fy[:, None]
    top = plane[y0][:, x0] * (1.0 - fx) + plane[y0][:, x1] * fx
    bot = plane[y1][:, x0] * (1.0 - fx) + plane[y1][:, x1] * fx
    return top * (1.0 - fy) + bot * fy


def resize_image(img: Image, out_h: int, out_w: int) -> Image:
    """Bilinear resize of an 8-bit image (all planes)."""
    planes = img.data.astype(np.float64)
    out = np.empty((out_h, out_w, img.planes))
    for p in range(img.planes):
        out[:, :, p] = resize_plane(planes[:, :, p], out_h, out_w)
    data = np.rint(out).astype(np.uint8)
    return Image(out_w, out_h, img.planes, data)


def crop_resize_window(img: Image, box, out_h: int, out_w: int) -> Image:
    """Crop a (x, y, w, h) box (clamped to the image) and resize it."""
    x, y, w, h = box
    x0 = max(0, int(x))
    y0 = max(0, int(y))
    x1 = min(img.width, int(x) + int(w))
    y1 = min(img.height, int(y) + int(h))
    if x1 - x0 < 1 or y1 - y0 < 1:
        raise ConfigError(f"box {box} does not intersect image")
    crop = img.data[y0:y1, x0:x1, :]
    sub = Image(x1 - x0, y1 - y0, img.planes, np.ascontiguousarray(crop))
    return resize_image(sub, out_h, out_w)
