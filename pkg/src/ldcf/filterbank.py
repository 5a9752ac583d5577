"""Decorrelation filter banks: per-channel eigenfilters of the
stationary patch covariance, applied convolutionally.

Filters are eigenvectors of the m^2 x m^2 patch covariance reshaped to
m x m in row-major order, the same pixel order used to build the
covariance; correlating a channel with filter q then equals projecting
every overlapping m x m patch onto q.  Ablation variants swap the
eigenvector choice (smallest-k, random orthonormal, one shared set from
the L channel) or restrict decorrelation to a channel group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, KTooLarge, LabelMismatch, PlaneTooSmall
from .channels import ChannelStack, aggregate
from .linstats import Autocorrelation, patch_covariance, sym_eig

VARIANTS = ("top_k", "smallest_k", "random", "constant", "luv_only", "grad_only")

_LUV_GROUP = ("L", "U", "V")


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Per source channel, a tuple of m x m filters (unit L2 norm)."""

    filters: tuple[tuple[np.ndarray, ...], ...]
    labels: tuple[str, ...]
    m: int
    k: int
    variant: str

    def __post_init__(self):
        if len(self.filters) != len(self.labels):
            raise ConfigError("one filter group per channel label required")
        for group in self.filters:
            for f in group:
                if f.shape != (self.m, self.m):
                    raise ConfigError(
                        f"filter shape {f.shape} != ({self.m}, {self.m})"
                    )

    @property
    def num_output_planes(self) -> int:
        return sum(len(g) for g in self.filters)

    def output_labels(self) -> tuple[str, ...]:
        out = []
        for label, group in zip(self.labels, self.filters):
            out.extend(f"{label}:f{j + 1}" for j in range(len(group)))
        return tuple(out)


@dataclass(frozen=True)
class FilterBankConfig:
    m: int = 5
    k: int = 4
    variant: str = "top_k"
    seed: int = 0

    def __post_init__(self):
        if self.m < 1 or self.m % 2 == 0:
            raise ConfigError(f"m must be odd and positive, got {self.m}")
        if self.k < 1:
            raise ConfigError(f"k must be >= 1, got {self.k}")
        if self.k > self.m * self.m:
            raise KTooLarge(f"k={self.k} exceeds m^2={self.m * self.m}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")


def _delta_filter(m: int) -> np.ndarray:
    f = np.zeros((m, m))
    f[m // 2, m // 2] = 1.0
    return f


def _eigen_filters(ac: Autocorrelation, channel: str, m: int, k: int, largest: bool):
    cov = patch_covariance(ac, channel, m)
    eig = sym_eig(cov)
    cols = range(k) if largest else range(cov.shape[0] - k, cov.shape[0])
    # row-major reshape matches the patch pixel order of the covariance
    return tuple(eig.q[:, j].reshape(m, m).copy() for j in cols)


def _random_filters(rng: np.random.Generator, m: int, k: int):
    """Orthonormal random filters via Gram-Schmidt on Gaussian draws."""
    d = m * m
    basis = []
    while len(basis) < k:
        v = rng.standard_normal(d)
        for b in basis:
            v = v - (b @ v) * b
        norm = np.linalg.norm(v)
        if norm > 1e-8:
            basis.append(v / norm)
    return tuple(b.reshape(m, m) for b in basis)


def derive_filters(ac: Autocorrelation, cfg: FilterBankConfig) -> FilterBank:
    """Build the per-channel filter bank from an estimated autocorrelation.

    Variants: top_k / smallest_k take the largest / smallest k
    eigenvectors per channel; random substitutes seeded orthonormal
    noise; constant reuses the L-channel eigenfilters for every channel;
    luv_only / grad_only decorrelate only the named group and give every
    other channel a single identity (delta) filter, so the plane counts
    come out to 3k+7 and 3+7k.
    """
    labels = ac.labels
    if ac.radius < cfg.m - 1:
        raise KTooLarge(
            f"autocorrelation radius {ac.radius} cannot cover patch size {cfg.m}"
        )
    groups: list[tuple[np.ndarray, ...]] = []
    if cfg.variant in ("top_k", "smallest_k"):
        largest = cfg.variant == "top_k"
        for label in labels:
            groups.append(_eigen_filters(ac, label, cfg.m, cfg.k, largest))
    elif cfg.variant == "random":
        rng = np.random.Generator(np.random.Philox(cfg.seed))
        for _ in labels:
            groups.append(_random_filters(rng, cfg.m, cfg.k))
    elif cfg.variant == "constant":
        if "L" not in labels:
            raise LabelMismatch("constant variant needs an L channel")
        shared = _eigen_filters(ac, "L", cfg.m, cfg.k, largest=True)
        groups = [shared for _ in labels]
    else:
        group_labels = (
            _LUV_GROUP if cfg.variant == "luv_only"
            else tuple(l for l in labels if l not in _LUV_GROUP)
        )
        delta = (_delta_filter(cfg.m),)
        for label in labels:
            if label in group_labels:
                groups.append(_eigen_filters(ac, label, cfg.m, cfg.k, largest=True))
            else:
                groups.append(delta)
    return FilterBank(tuple(groups), labels, cfg.m, cfg.k, cfg.variant)


def apply_filterbank(
    stack: ChannelStack, fb: FilterBank, downsample: bool = True
) -> ChannelStack:
    """Correlate every channel with its filters (replicate borders,
    same output size), then optionally block-mean downsample by 2.

    Output planes are labeled `<src>:f<j>`, ordered by source channel
    then filter index.
    """
    if stack.labels != fb.labels:
        raise LabelMismatch(
            f"stack channels {stack.labels} != filter bank {fb.labels}"
        )
    if stack.height < fb.m or stack.width < fb.m:
        raise PlaneTooSmall(
            f"planes {stack.height}x{stack.width} smaller than filter {fb.m}x{fb.m}"
        )
    out = np.empty((fb.num_output_planes, stack.height, stack.width))
    pos = 0
    for c, group in enumerate(fb.filters):
        for f in group:
            ndimage.correlate(stack.planes[c], f, output=out[pos], mode="nearest")
            pos += 1
    result = ChannelStack(out, fb.output_labels(), stack.shrink)
    if downsample:
        result = aggregate(result, 2)
    return result


# --- text serialization ---


def save_filterbank(fb: FilterBank, path) -> None:
    lines = [
        f"m {fb.m}",
        f"k {fb.k}",
        f"variant {fb.variant}",
        "labels " + " ".join(fb.labels),
    ]
    for label, group in zip(fb.labels, fb.filters):
        lines.append(f"channel {label} {len(group)}")
        for j, f in enumerate(group):
            lines.append(f"filter {j + 1}")
            for r in range(fb.m):
                lines.append(" ".join(repr(float(x)) for x in f[r]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_filterbank(path) -> FilterBank:
    with open(path) as fh:
        tokens = [ln.strip() for ln in fh if ln.strip()]
    try:
        m = int(tokens[0].split()[1])
        k = int(tokens[1].split()[1])
        variant = tokens[2].split()[1]
        labels = tuple(tokens[3].split()[1:])
        pos = 4
        groups = []
        for label in labels:
            head = tokens[pos].split()
            if head[0] != "channel" or head[1] != label:
                raise ValueError(f"expected channel {label}")
            count = int(head[2])
            pos += 1
            group = []
            for _ in range(count):
                if not tokens[pos].startswith("filter"):
                    raise ValueError("expected filter block")
                pos += 1
                grid = np.array(
                    [[float(t) for t in tokens[pos + r].split()] for r in range(m)]
                )
                pos += m
                group.append(grid)
            groups.append(tuple(group))
    except (IndexError, ValueError) as exc:
        from .errors import DataError

        raise DataError(f"{path}: malformed filter bank file: {exc}") from exc
    return FilterBank(tuple(groups), labels, m, k, variant)
