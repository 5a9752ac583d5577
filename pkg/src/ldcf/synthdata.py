"""Seeded synthetic detection dataset for end-to-end desk runs.

Images are smoothed color noise (spatially correlated, which is the
regime where channel decorrelation has something to do); positives
carry one alpha-blended oriented template at a random integer
position.  The template mixes vertical stripes, a horizontal band and
a per-seed color, so gradient-orientation and color channels all see
signal.  Everything derives from a single counter-based stream, so a
spec reproduces its dataset bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError
from .imgio import GroundTruthBox, Image, save_image


@dataclass(frozen=True)
class DeskSpec:
    image_height: int = 64
    image_width: int = 64
    window_height: int = 32
    window_width: int = 16
    n_pos_train: int = 100
    n_neg_train: int = 100
    n_test: int = 100
    alpha: float = 0.7
    smoothing_passes: int = 2
    seed: int = 0

    def __post_init__(self):
        if (
            self.window_height > self.image_height
            or self.window_width > self.image_width
        ):
            raise ConfigError("window must fit inside the image")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must be in (0, 1]")
        if min(self.n_pos_train, self.n_neg_train, self.n_test) < 1:
            raise ConfigError("need at least one image per split")


@dataclass(frozen=True, eq=False)
class DeskDataset:
    train_pos: tuple  # (Image, GroundTruthBox) pairs
    train_neg: tuple  # Images
    test: tuple       # (Image, GroundTruthBox) pairs
    template: np.ndarray


def _make_template(rng, h: int, w: int) -> np.ndarray:
    """Oriented (h, w, 3) float template in [0, 255]."""
    base = rng.uniform(110.0, 190.0, 3)
    period = float(rng.uniform(6.0, 10.0))
    phase = float(rng.uniform(0.0, 2.0 * np.pi))
    xs = np.arange(w, dtype=np.float64)
    stripes = 55.0 * np.sin(2.0 * np.pi * xs / period + phase)
    tpl = np.empty((h, w, 3))
    tpl[:] = base + stripes[None, :, None]
    band = h // 3
    tpl[band : band + max(2, h // 10), :, :] += 45.0
    tpl[:2, :, :] -= 45.0
    tpl[-2:, :, :] -= 45.0
    return np.clip(tpl, 0.0, 255.0)


def _make_background(rng, spec: DeskSpec) -> np.ndarray:
    noise = rng.normal(128.0, 40.0, (spec.image_height, spec.image_width, 3))
    for _ in range(spec.smoothing_passes):
        for p in range(3):
            noise[:, :, p] = ndimage.uniform_filter(
                noise[:, :, p], size=3, mode="nearest"
            )
    return noise


def _blend(bg: np.ndarray, tpl: np.ndarray, x: int, y: int, alpha: float):
    h, w = tpl.shape[:2]
    out = bg.copy()
    out[y : y + h, x : x + w, :] = (
        (1.0 - alpha) * out[y : y + h, x : x + w, :] + alpha * tpl
    )
    return out


def _to_image(arr: np.ndarray) -> Image:
    data = np.clip(np.rint(arr), 0, 255).astype(np.uint8)
    return Image(data.shape[1], data.shape[0], 3, data)


def make_desk_dataset(spec: DeskSpec) -> DeskDataset:
    """Generate the three splits from one stream seeded by the spec."""
    rng = np.random.Generator(np.random.Philox(spec.seed))
    tpl = _make_template(rng, spec.window_height, spec.window_width)
    max_x = spec.image_width - spec.window_width
    max_y = spec.image_height - spec.window_height

    def positive():
        bg = _make_background(rng, spec)
        x = int(rng.integers(0, max_x + 1))
        y = int(rng.integers(0, max_y + 1))
        img = _to_image(_blend(bg, tpl, x, y, spec.alpha))
        box = GroundTruthBox(
            x=float(x), y=float(y),
            w=float(spec.window_width), h=float(spec.window_height),
        )
        return img, box

    train_pos = tuple(positive() for _ in range(spec.n_pos_train))
    train_neg = tuple(
        _to_image(_make_background(rng, spec)) for _ in range(spec.n_neg_train)
    )
    test = tuple(positive() for _ in range(spec.n_test))
    return DeskDataset(train_pos, train_neg, test, tpl)


def write_desk_dataset(ds: DeskDataset, root) -> None:
    """Write splits in the directory shape the dataset scanner and the
    command-line tools expect: ``pos``/``pos-annot``/``neg`` for
    training plus ``test``/``test-annot`` for evaluation."""
    root = Path(root)
    for sub in ("pos", "pos-annot", "neg", "test", "test-annot"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i, (img, box) in enumerate(ds.train_pos):
        save_image(img, root / "pos" / f"pos-{i:03d}.ppm")
        _write_box(root / "pos-annot" / f"pos-{i:03d}.txt", box)
    for i, img in enumerate(ds.train_neg):
        save_image(img, root / "neg" / f"neg-{i:03d}.ppm")
    for i, (img, box) in enumerate(ds.test):
        save_image(img, root / "test" / f"test-{i:03d}.ppm")
        _write_box(root / "test-annot" / f"test-{i:03d}.txt", box)


def _write_box(path: Path, box: GroundTruthBox) -> None:
    path.write_text(f"{box.x:g} {box.y:g} {box.w:g} {box.h:g}\n")
