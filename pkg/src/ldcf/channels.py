"""Per-pixel feature channels: LUV color, normalized gradient magnitude,
and soft-binned gradient orientation histograms, with block-mean
aggregation (shrink).

The 10-channel stack is ordered [L, U, V, M, O1..O6].  Orientation
channels hold raw (pre-normalization) gradient magnitude mass, linearly
split between the two nearest of 6 unsigned orientation bins; only the
M channel is normalized.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    DataError,
    InvalidFactor,
    NotColorImage,
    PlaneTooSmall,
)
from .imgio import Image

ACF_LABELS = ("L", "U", "V", "M", "O1", "O2", "O3", "O4", "O5", "O6")

# sRGB -> XYZ (D65 white), row order X, Y, Z.
_SRGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_X, _WHITE_Y, _WHITE_Z = 0.95047, 1.0, 1.08883
_UN_PRIME = 4.0 * _WHITE_X / (_WHITE_X + 15.0 * _WHITE_Y + 3.0 * _WHITE_Z)
_VN_PRIME = 9.0 * _WHITE_Y / (_WHITE_X + 15.0 * _WHITE_Y + 3.0 * _WHITE_Z)

# Affine maps taking CIELUV onto [0, 1]: L in [0, 100], u in [-134, 220],
# v in [-140, 122] (the classic 8-bit LUV convention).
_L_SCALE = 1.0 / 100.0
_U_OFFSET, _U_SCALE = 134.0, 1.0 / 354.0
_V_OFFSET, _V_SCALE = 140.0, 1.0 / 262.0


@dataclass(frozen=True, eq=False)
class ChannelStack:
    """A set of same-sized real-valued feature planes.

    ``planes`` has shape (channels, height, width); ``shrink`` records
    the total integer downsampling applied so far.
    """

    planes: np.ndarray
    labels: tuple[str, ...]
    shrink: int = 1

    def __post_init__(self):
        if self.planes.ndim != 3:
            raise DataError(f"planes must be 3-d, got {self.planes.ndim}-d")
        if len(self.labels) != self.planes.shape[0]:
            raise DataError("one label per plane required")
        if len(set(self.labels)) != len(self.labels):
            raise DataError("channel labels must be unique")

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    def plane(self, label: str) -> np.ndarray:
        return self.planes[self.labels.index(label)]


@dataclass(frozen=True)
class ChannelConfig:
    shrink: int = 2
    num_orientation_bins: int = 6
    gradient_norm_constant: float = 0.005
    smoothing_radius: int = 2  # triangle filter radius for M normalization

    def __post_init__(self):
        if self.shrink not in (1, 2, 4):
            raise InvalidFactor(f"shrink must be 1, 2 or 4, got {self.shrink}")
        if self.num_orientation_bins < 2:
            raise InvalidFactor("need at least 2 orientation bins")


def _linearize_srgb(v):
    """Standard piecewise sRGB gamma expansion; v in [0, 1]."""
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def rgb_to_luv(img: Image) -> np.ndarray:
    """Convert an RGB image to L, U, V planes rescaled to [0, 1].

    Returns an array of shape (3, height, width).
    """
    if img.planes != 3:
        raise NotColorImage(f"need 3 planes, got {img.planes}")
    rgb = img.data.astype(np.float64) / 255.0
    lin = _linearize_srgb(rgb)
    xyz = lin @ _SRGB_TO_XYZ.T
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]

    denom = x + 15.0 * y + 3.0 * z
    safe = denom > 0
    u_prime = np.where(safe, 4.0 * x / np.where(safe, denom, 1.0), 0.0)
    v_prime = np.where(safe, 9.0 * y / np.where(safe, denom, 1.0), 0.0)

    yr = y / _WHITE_Y
    cutoff = (6.0 / 29.0) ** 3
    lstar = np.where(yr > cutoff, 116.0 * np.cbrt(yr) - 16.0, (29.0 / 3.0) ** 3 * yr)
    ustar = 13.0 * lstar * (u_prime - _UN_PRIME)
    vstar = 13.0 * lstar * (v_prime - _VN_PRIME)

    out = np.stack(
        [
            lstar * _L_SCALE,
            (ustar + _U_OFFSET) * _U_SCALE,
            (vstar + _V_OFFSET) * _V_SCALE,
        ]
    )
    return out


def gradients(luma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference gradient magnitude and unsigned orientation.

    Borders are replicated before differencing.  Magnitude is >= 0;
    orientation lies in [0, pi).
    """
    if luma.ndim != 2 or luma.shape[0] < 3 or luma.shape[1] < 3:
        raise PlaneTooSmall(f"need at least 3x3, got {luma.shape}")
    p = np.pad(luma, 1, mode="edge")
    dx = (p[1:-1, 2:] - p[1:-1, :-2]) / 2.0
    dy = (p[2:, 1:-1] - p[:-2, 1:-1]) / 2.0
    mag = np.hypot(dx, dy)
    ori = np.arctan2(dy, dx)
    ori = np.where(ori < 0, ori + np.pi, ori)
    ori = np.where(ori >= np.pi, ori - np.pi, ori)
    return mag, ori


def _triangle_kernel(radius: int) -> np.ndarray:
    k = np.concatenate([np.arange(1, radius + 2), np.arange(radius, 0, -1)])
    return k.astype(np.float64) / k.sum()


def _smooth_triangle(plane: np.ndarray, radius: int) -> np.ndarray:
    """Separable triangle smoothing with replicated borders."""
    if radius < 1:
        return plane.copy()
    k = _triangle_kernel(radius)
    p = np.pad(plane, radius, mode="edge")
    out = np.zeros_like(plane)
    for i, w in enumerate(k):
        out += w * p[i : i + plane.shape[0], radius : radius + plane.shape[1]]
    out2 = np.zeros_like(plane)
    p = np.pad(out, ((0, 0), (radius, radius)), mode="edge")
    for j, w in enumerate(k):
        out2 += w * p[:, j : j + plane.shape[1]]
    return out2


def normalize_magnitude(mag: np.ndarray, constant: float, radius: int) -> np.ndarray:
    """M~ = M / (M smoothed by a triangle filter + constant)."""
    return mag / (_smooth_triangle(mag, radius) + constant)


def orientation_channels(
    mag: np.ndarray, ori: np.ndarray, num_bins: int
) -> np.ndarray:
    """Split magnitude mass between the two nearest orientation bins.

    Bin centers sit at j*pi/num_bins; assignment is linear and wraps
    modulo pi, so the bins sum exactly to ``mag`` at every pixel.
    """
    bin_width = np.pi / num_bins
    t = ori / bin_width
    j0 = np.floor(t).astype(np.intp) % num_bins
    frac = t - np.floor(t)
    j1 = (j0 + 1) % num_bins
    out = np.zeros((num_bins,) + mag.shape)
    flat0 = j0.ravel()
    flat1 = j1.ravel()
    cols = np.arange(mag.size)
    out_flat = out.reshape(num_bins, -1)
    np.add.at(out_flat, (flat0, cols), (mag * (1.0 - frac)).ravel())
    np.add.at(out_flat, (flat1, cols), (mag * frac).ravel())
    return out


def aggregate(stack: ChannelStack, factor: int) -> ChannelStack:
    """Block-mean downsample every plane by ``factor``.

    Implemented as repeated 2x halvings for even factors so that
    aggregate(aggregate(s, 2), 2) is bit-identical to aggregate(s, 4);
    dimensions are cropped to a multiple of the factor first.
    """
    if not isinstance(factor, (int, np.integer)) or factor < 1:
        raise InvalidFactor(f"factor must be a positive integer, got {factor!r}")
    planes = stack.planes
    h = planes.shape[1] - planes.shape[1] % factor
    w = planes.shape[2] - planes.shape[2] % factor
    if h == 0 or w == 0:
        raise InvalidFactor(f"factor {factor} exceeds plane size {planes.shape[1:]}")
    planes = planes[:, :h, :w].copy()
    remaining = int(factor)
    while remaining % 2 == 0:
        c, hh, ww = planes.shape
        planes = planes.reshape(c, hh // 2, 2, ww // 2, 2).mean(axis=(2, 4))
        remaining //= 2
    if remaining > 1:
        c, hh, ww = planes.shape
        planes = planes.reshape(
            c, hh // remaining, remaining, ww // remaining, remaining
        ).mean(axis=(2, 4))
    return ChannelStack(planes, stack.labels, stack.shrink * int(factor))


def compute_channels(img: Image, cfg: ChannelConfig = ChannelConfig()) -> ChannelStack:
    """Compute the 10 aggregated feature channels of an image.

    Gray images are promoted to RGB by plane replication before the
    color conversion.
    """
    if img.planes == 1:
        rgb = Image(img.width, img.height, 3, np.repeat(img.data, 3, axis=2))
    else:
        rgb = img
    luv = rgb_to_luv(rgb)
    mag, ori = gradients(luv[0])
    norm_mag = normalize_magnitude(
        mag, cfg.gradient_norm_constant, cfg.smoothing_radius
    )
    orients = orientation_channels(mag, ori, cfg.num_orientation_bins)
    planes = np.concatenate([luv, norm_mag[None], orients])
    labels = ("L", "U", "V", "M") + tuple(
        f"O{j + 1}" for j in range(cfg.num_orientation_bins)
    )
    stack = ChannelStack(planes, labels, shrink=1)
    if cfg.shrink > 1:
        stack = aggregate(stack, cfg.shrink)
    return stack


# --- binary container ---

_MAGIC = b"LDCFCHN1"


def save_stack(stack: ChannelStack, path) -> None:
    """Write a stack as: magic, width, height, shrink, count, labels,
    then planes as little-endian float32."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIII", stack.width, stack.height, stack.shrink, len(stack.labels)
            )
        )
        label_blob = "\n".join(stack.labels).encode("utf-8")
        fh.write(struct.pack("<I", len(label_blob)))
        fh.write(label_blob)
        fh.write(stack.planes.astype("<f4").tobytes())


def load_stack(path) -> ChannelStack:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise DataError(f"{path}: not a channel container")
        width, height, shrink, count = struct.unpack("<IIII", fh.read(16))
        (label_len,) = struct.unpack("<I", fh.read(4))
        labels = tuple(fh.read(label_len).decode("utf-8").split("\n"))
        need = count * height * width * 4
        blob = fh.read(need)
        if len(blob) < need:
            raise DataError(f"{path}: truncated plane data")
        planes = (
            np.frombuffer(blob, dtype="<f4")
            .reshape(count, height, width)
            .astype(np.float64)
        )
    return ChannelStack(planes, labels, shrink)
