"""Multiscale sliding-window detection with soft-cascade rejection and
non-maximum suppression, plus the window scanner used for hard-negative
harvesting.

A pyramid level at scale s is the independently resampled image (by
factor s) run through the channel (and optional filter) pipeline.  A
window at post-shrink cell (y, x) maps back to original pixels through
the stack's total shrink and the level's scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GeometryMismatch, ImageTooSmall
from .boost import BoostedEnsemble, FeatureGeometry, score_matrix
from .channels import ChannelConfig, ChannelStack, compute_channels
from .filterbank import FilterBank, apply_filterbank
from .imgio import Image
from .resample import resize_image


@dataclass(frozen=True)
class DetectorConfig:
    window_height: int = 128
    window_width: int = 64
    stride: int = 4  # pre-shrink pixels; converted per level
    scales_per_octave: int = 8
    min_scale: float | None = None  # None: shrink until the window no longer fits
    max_scale: float = 1.0
    nms_overlap: float = 0.65
    nms_mode: str = "min"  # min-area denominator; "iou" available
    decision_threshold: float = 0.0
    filter_downsample: bool = True

    def __post_init__(self):
        if self.window_height < 1 or self.window_width < 1:
            raise ConfigError("window must be positive")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if self.scales_per_octave < 1:
            raise ConfigError("scales_per_octave must be >= 1")
        if self.max_scale <= 0:
            raise ConfigError("max_scale must be positive")
        if self.nms_mode not in ("min", "iou"):
            raise ConfigError("nms_mode must be 'min' or 'iou'")


@dataclass(frozen=True)
class Detection:
    x: float
    y: float
    w: float
    h: float
    score: float
    scale: float = 1.0

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ConfigError("detection box must have positive size")


def pyramid_scales(img: Image, cfg: DetectorConfig) -> list[float]:
    """Geometric scale ladder, largest first; every scale keeps the
    resized image at least window-sized."""

    def fits(s: float) -> bool:
        return (
            round(img.height * s) >= cfg.window_height
            and round(img.width * s) >= cfg.window_width
        )

    if not fits(cfg.max_scale):
        raise ImageTooSmall(
            f"image {img.width}x{img.height} cannot hold a "
            f"{cfg.window_width}x{cfg.window_height} window at scale "
            f"{cfg.max_scale}"
        )
    scales = []
    j = 0
    while True:
        s = cfg.max_scale * 2.0 ** (-j / cfg.scales_per_octave)
        if not fits(s) or (cfg.min_scale is not None and s < cfg.min_scale):
            break
        scales.append(s)
        j += 1
    return scales


def build_pyramid(
    img: Image,
    channel_cfg: ChannelConfig,
    fb: FilterBank | None,
    det_cfg: DetectorConfig,
) -> list[tuple[float, ChannelStack]]:
    """Channels (and filters, when a bank is given) computed
    independently at every scale of the ladder."""
    levels = []
    for s in pyramid_scales(img, det_cfg):
        h = int(round(img.height * s))
        w = int(round(img.width * s))
        scaled = img if (h == img.height and w == img.width) else resize_image(img, h, w)
        stack = compute_channels(scaled, channel_cfg)
        if fb is not None:
            stack = apply_filterbank(stack, fb, downsample=det_cfg.filter_downsample)
        levels.append((s, stack))
    return levels


def _window_grid(stack: ChannelStack, det_cfg: DetectorConfig):
    """Post-shrink window size, stride and positions for one level."""
    shrink = stack.shrink
    if det_cfg.window_height % shrink or det_cfg.window_width % shrink:
        raise GeometryMismatch(
            f"window {det_cfg.window_height}x{det_cfg.window_width} not "
            f"divisible by total shrink {shrink}"
        )
    wh = det_cfg.window_height // shrink
    ww = det_cfg.window_width // shrink
    step = max(1, det_cfg.stride // shrink)
    ys = np.arange(0, stack.height - wh + 1, step)
    xs = np.arange(0, stack.width - ww + 1, step)
    return wh, ww, step, ys, xs


def window_features(stack: ChannelStack, det_cfg: DetectorConfig):
    """All stride-aligned window feature rows of one level.

    Returns (features (N, C*wh*ww), ys, xs) with windows ordered
    row-major over (y, x); feature layout matches FeatureGeometry.
    """
    wh, ww, _, ys, xs = _window_grid(stack, det_cfg)
    if ys.size == 0 or xs.size == 0:
        d = stack.planes.shape[0] * wh * ww
        return np.empty((0, d)), ys, xs
    view = np.lib.stride_tricks.sliding_window_view(stack.planes, (wh, ww), axis=(1, 2))
    sel = view[:, ys[:, None], xs[None, :]]  # (C, ny, nx, wh, ww)
    feats = sel.transpose(1, 2, 0, 3, 4).reshape(ys.size * xs.size, -1)
    return np.ascontiguousarray(feats), ys, xs


def _check_geometry(ens: BoostedEnsemble, stack: ChannelStack, wh: int, ww: int):
    if ens.geometry is not None:
        g = ens.geometry
        if (g.channels, g.height, g.width) != (stack.planes.shape[0], wh, ww):
            raise GeometryMismatch(
                f"ensemble geometry {g.channels}x{g.height}x{g.width} vs "
                f"level {stack.planes.shape[0]}x{wh}x{ww}"
            )
    elif ens.feature_dim != stack.planes.shape[0] * wh * ww:
        raise GeometryMismatch(
            f"ensemble dim {ens.feature_dim} vs window dim "
            f"{stack.planes.shape[0] * wh * ww}"
        )


def detect(
    pyramid: list[tuple[float, ChannelStack]],
    ens: BoostedEnsemble,
    det_cfg: DetectorConfig,
    use_cascade: bool = True,
) -> list[Detection]:
    """Score every stride-aligned window at every level, keep cascade
    survivors whose score is at or above the decision threshold, map
    boxes back to original pixels (deterministic scale, y, x order),
    then run NMS."""
    raw: list[Detection] = []
    for s, stack in pyramid:
        wh, ww, _, ys, xs = _window_grid(stack, det_cfg)
        _check_geometry(ens, stack, wh, ww)
        feats, ys, xs = window_features(stack, det_cfg)
        if feats.shape[0] == 0:
            continue
        scores, rejected = score_matrix(ens, feats, use_cascade=use_cascade)
        shrink = stack.shrink
        # rejected windows carry truncated sums; they are not detections
        keep = (scores >= det_cfg.decision_threshold) & (rejected < 0)
        for flat in np.flatnonzero(keep):
            yi, xi = divmod(int(flat), xs.size)
            raw.append(
                Detection(
                    x=float(xs[xi] * shrink / s),
                    y=float(ys[yi] * shrink / s),
                    w=det_cfg.window_width / s,
                    h=det_cfg.window_height / s,
                    score=float(scores[flat]),
                    scale=s,
                )
            )
    return nms(raw, det_cfg.nms_overlap, det_cfg.nms_mode)


def _pair_overlap(a: Detection, b: Detection, mode: str) -> float:
    ix = max(0.0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0.0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    if mode == "min":
        return inter / min(a.w * a.h, b.w * b.h)
    return inter / (a.w * a.h + b.w * b.h - inter)


def nms(dets: list[Detection], overlap: float, mode: str = "min") -> list[Detection]:
    """Greedy suppression in descending score order (ties: x, then y);
    a box is dropped when its overlap with an already-kept box exceeds
    the threshold."""
    order = sorted(dets, key=lambda d: (-d.score, d.x, d.y))
    kept: list[Detection] = []
    for cand in order:
        if all(_pair_overlap(cand, k, mode) <= overlap for k in kept):
            kept.append(cand)
    return kept


def harvest_negatives(
    images: list[Image],
    ens: BoostedEnsemble,
    channel_cfg: ChannelConfig,
    fb: FilterBank | None,
    det_cfg: DetectorConfig,
    needed: int,
    per_image_cap: int = 25,
) -> np.ndarray:
    """Top-scoring windows from negative images, as training features.

    Per image, at most ``per_image_cap`` windows (by score) survive so a
    single image cannot flood the pool; the global top ``needed`` are
    returned.  Ordering is deterministic: score descending, then image
    index, then window index.
    """
    rows = []
    for img_idx, img in enumerate(images):
        img_rows = []
        w_base = 0  # running window index across the image's levels
        for s, stack in build_pyramid(img, channel_cfg, fb, det_cfg):
            feats, ys, xs = window_features(stack, det_cfg)
            if feats.shape[0] == 0:
                continue
            scores, _ = score_matrix(ens, feats, use_cascade=False)
            top = np.argsort(-scores, kind="stable")[:per_image_cap]
            for w_idx in top:
                img_rows.append(
                    (-float(scores[w_idx]), img_idx, w_base + int(w_idx), feats[w_idx])
                )
            w_base += feats.shape[0]
        img_rows.sort(key=lambda r: r[:3])
        rows.extend(img_rows[:per_image_cap])
    rows.sort(key=lambda r: r[:3])
    if not rows:
        return np.empty((0, ens.feature_dim))
    return np.stack([r[3] for r in rows[:needed]])


# --- detections text format ---


def save_detections(per_image: dict, path) -> None:
    """One `image_path x y w h score` line per detection, 6 significant
    digits, images in sorted order."""
    lines = []
    for name in sorted(per_image):
        for d in per_image[name]:
            lines.append(
                f"{name} {d.x:.6g} {d.y:.6g} {d.w:.6g} {d.h:.6g} {d.score:.6g}"
            )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_detections(path) -> dict:
    from .errors import MalformedLine

    per_image: dict[str, list[Detection]] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise MalformedLine(f"{path}:{lineno}: expected 6 fields")
            try:
                x, y, w, h, score = (float(t) for t in parts[1:])
            except ValueError as exc:
                raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
            per_image.setdefault(parts[0], []).append(
                Detection(x=x, y=y, w=w, h=h, score=score)
            )
    return per_image
