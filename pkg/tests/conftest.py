"""Shared fixtures: deterministic images, stacks and tiny datasets."""

import numpy as np
import pytest

from ldcf.channels import ChannelStack
from ldcf.imgio import Image
from ldcf.linstats import Autocorrelation


def make_image(arr) -> Image:
    """Wrap an (H, W) or (H, W, 3) uint8 array."""
    arr = np.asarray(arr, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return Image(arr.shape[1], arr.shape[0], arr.shape[2], np.ascontiguousarray(arr))


def make_stack(planes, shrink: int = 1) -> ChannelStack:
    """Single- or multi-plane float stack with generated labels."""
    planes = np.asarray(planes, dtype=np.float64)
    if planes.ndim == 2:
        planes = planes[None]
    labels = tuple(f"ch{i}" for i in range(planes.shape[0]))
    return ChannelStack(planes, labels, shrink)


def se_autocorr(radius: int, ell: float = 2.0, along_x: bool = True,
                label: str = "se") -> Autocorrelation:
    """Squared-exponential correlation along one axis, constant along the
    other; a valid stationary model (outer product of a PSD profile and
    the all-ones kernel) whose patch covariance has strictly ordered
    eigenvalues and oscillation-counting eigenfilters."""
    d = np.arange(-radius, radius + 1, dtype=np.float64)
    prof = np.exp(-(d**2) / (2.0 * ell * ell))
    side = 2 * radius + 1
    grid = np.tile(prof[None, :], (side, 1)) if along_x \
        else np.tile(prof[:, None], (1, side))
    counts = np.ones((side, side))
    return Autocorrelation(grid[None], counts, (label,))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20260815))


@pytest.fixture
def gradient_rgb():
    """A smooth diagonal color ramp; exercises all channel types."""
    y, x = np.mgrid[0:48, 0:48]
    r = (2.5 * x) % 256
    g = (1.5 * y) % 256
    b = ((x + y) * 1.2) % 256
    return make_image(np.stack([r, g, b], axis=-1))


@pytest.fixture
def noise_rgb(rng):
    return make_image(rng.integers(0, 256, size=(40, 40, 3)))
