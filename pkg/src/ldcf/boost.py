"""Boosted decision trees with orthogonal and oblique (LDA) splits:
RealBoost training, hard-negative bootstrapping, soft-cascade
calibration, and serialization.

Split search scans candidate thresholds at the midpoints of consecutive
distinct sorted values and minimizes the weighted classification error
min(WL+, WL-) + min(WR+, WR-); ties break to the lowest feature index,
then the lowest threshold.  This makes split selection exactly
invariant under strictly positive per-feature scalings.

Oblique splits threshold z = w^T x over one m x m patch of one channel,
with w the regularized LDA direction of the node's weighted class
means.  In the boosting loop, per-candidate directions and projections
are refreshed only at tree boundaries when the update period elapses
and are reused in between.
"""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegenerateNode,
    DimensionMismatch,
    EmptyPositives,
    MissingGeometry,
)
from .linstats import (
    Autocorrelation,
    ensure_psd,
    extract_rect_sigma,
    lda_directions,
    stationary_rect_cov,
    window_covariance,
)

SPLIT_POLICIES = ("orthogonal", "oblique_per_patch", "oblique_shared")


@dataclass(frozen=True)
class FeatureGeometry:
    """Spatial layout of a flattened window feature vector.

    Feature index = channel*(height*width) + row*width + col, i.e. the
    row-major flattening of a (channels, height, width) stack.
    """

    channels: int
    height: int
    width: int
    shrink: int = 1

    @property
    def dim(self) -> int:
        return self.channels * self.height * self.width

    def patch_indices(self, channel: int, i: int, j: int, ph: int, pw: int):
        rows = (i + np.arange(ph))[:, None] * self.width + (j + np.arange(pw))
        return (channel * self.height * self.width + rows).ravel()


class _ScanKernel:
    """Vectorized exhaustive threshold scan over a fixed feature matrix.

    Precomputes one stable argsort per feature; per node, the subset's
    sorted order falls out of a boolean compaction of that matrix.
    """

    def __init__(self, features: np.ndarray):
        ft = np.ascontiguousarray(features.T)
        self.ft = ft
        self.order = np.argsort(ft, axis=1, kind="stable").astype(np.int32)

    def best(self, mask: np.ndarray, wpos: np.ndarray, wneg: np.ndarray):
        """Return (feature, threshold, weighted error) for the masked
        subset, or raise DegenerateNode when no useful split exists."""
        total_pos = float(wpos[mask].sum())
        total_neg = float(wneg[mask].sum())
        if total_pos <= 0.0 or total_neg <= 0.0:
            raise DegenerateNode("subset carries a single class")
        ns = int(np.count_nonzero(mask))
        if ns < 2:
            raise DegenerateNode("subset too small to split")
        sub = self.order[mask[self.order]].reshape(self.ft.shape[0], ns)
        vals = np.take_along_axis(self.ft, sub, axis=1)
        cum_pos = np.cumsum(wpos[sub], axis=1)[:, :-1]
        cum_neg = np.cumsum(wneg[sub], axis=1)[:, :-1]
        err = np.minimum(cum_pos, cum_neg)
        err += np.minimum(total_pos - cum_pos, total_neg - cum_neg)
        err[vals[:, 1:] == vals[:, :-1]] = np.inf
        flat = int(np.argmin(err))
        f, t = divmod(flat, ns - 1)
        best = float(err[f, t])
        if not math.isfinite(best):
            raise DegenerateNode("all features constant on subset")
        threshold = 0.5 * (float(vals[f, t]) + float(vals[f, t + 1]))
        return f, threshold, best


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Weighted binary-labeled samples, optionally with window geometry."""

    features: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    geometry: FeatureGeometry | None = None

    def __post_init__(self):
        n, d = self.features.shape
        if n < 2:
            raise DataError("need at least 2 samples")
        if self.labels.shape != (n,) or self.weights.shape != (n,):
            raise DimensionMismatch("labels/weights must match sample count")
        if not np.all(np.isin(self.labels, (-1, 1))):
            raise DataError("labels must be +1 or -1")
        if not (np.any(self.labels == 1) and np.any(self.labels == -1)):
            raise DataError("both classes must be present")
        if np.any(self.weights <= 0.0):
            raise DataError("weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-9:
            raise DataError("weights must sum to 1")
        if self.geometry is not None and self.geometry.dim != d:
            raise DimensionMismatch(
                f"geometry dim {self.geometry.dim} != feature dim {d}"
            )

    @staticmethod
    def create(features, labels, weights=None, geometry=None) -> "TrainingSet":
        features = np.ascontiguousarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int8)
        if weights is None:
            weights = np.full(len(features), 1.0 / len(features))
        else:
            weights = np.asarray(weights, dtype=np.float64)
            weights = weights / weights.sum()
        return TrainingSet(features, labels, weights, geometry)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def kernel(self) -> _ScanKernel:
        return _ScanKernel(self.features)


@dataclass(frozen=True, eq=False)
class Split:
    """A decision-node test; samples go right when the projected value
    exceeds the threshold."""

    kind: str
    threshold: float
    feature: int = -1
    channel: int = -1
    top_left: tuple[int, int] = (-1, -1)
    patch_shape: tuple[int, int] = (0, 0)
    w: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("orthogonal", "oblique"):
            raise ConfigError(f"unknown split kind {self.kind!r}")
        if self.kind == "oblique":
            if self.w is None or not np.all(np.isfinite(self.w)):
                raise DataError("oblique split needs a finite weight vector")
            if not np.any(self.w):
                raise DataError("oblique weight vector must not be all-zero")

    def project(self, x: np.ndarray, geometry: FeatureGeometry | None):
        if self.kind == "orthogonal":
            return x[:, self.feature]
        if geometry is None:
            raise MissingGeometry("oblique split evaluation needs geometry")
        idx = geometry.patch_indices(
            self.channel, *self.top_left, *self.patch_shape
        )
        return x[:, idx] @ self.w

    def goes_right(self, x: np.ndarray, geometry=None) -> np.ndarray:
        return self.project(x, geometry) > self.threshold


@dataclass(frozen=True, eq=False)
class Tree:
    """Binary decision tree in preorder arrays; -1 marks missing child."""

    splits: tuple
    left: np.ndarray
    right: np.ndarray
    values: np.ndarray

    @property
    def num_nodes(self) -> int:
        return len(self.splits)


@dataclass(frozen=True)
class BoostConfig:
    num_trees: int = 2048
    max_depth: int = 3
    split_policy: str = "orthogonal"
    update_period: float = 16
    eps: float = 0.1
    m: int = 5
    bootstrap_schedule: tuple[int, ...] = (32, 128, 512, 2048)
    negatives_cap: int = 10000
    harvest_per_image: int = 25
    leaf_smoothing: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 1:
            raise ConfigError("num_trees must be >= 1")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1")
        if self.split_policy not in SPLIT_POLICIES:
            raise ConfigError(
                f"split_policy must be one of {SPLIT_POLICIES}, "
                f"got {self.split_policy!r}"
            )
        if not (self.update_period >= 1 or math.isinf(self.update_period)):
            raise ConfigError("update_period must be >= 1 or infinite")
        if not 0.0 <= self.eps <= 1.0:
            raise ConfigError("eps must lie in [0, 1]")
        if self.m < 1 or self.m % 2 == 0:
            raise ConfigError("m must be odd and positive")
        if self.negatives_cap < 0:
            raise ConfigError("negatives_cap must be >= 0")


@dataclass(frozen=True, eq=False)
class BoostedEnsemble:
    """Trees plus per-prefix cascade thresholds (-inf = never reject)."""

    trees: tuple
    thresholds: np.ndarray
    config: BoostConfig
    feature_dim: int
    geometry: FeatureGeometry | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if self.thresholds.shape != (len(self.trees),):
            raise DimensionMismatch("one cascade threshold per tree required")

    @property
    def num_trees(self) -> int:
        return len(self.trees)


# --- sigma sources for oblique splits ---


class SharedStationarySigma:
    """One stationary covariance per channel, shared across all patch
    positions; rectangles are cut from the offset grid directly."""

    position_independent = True

    def __init__(self, ac: Autocorrelation):
        self.ac = ac
        self._cache: dict = {}

    def sigma(self, channel: int, i: int, j: int, ph: int, pw: int) -> np.ndarray:
        key = (channel, ph, pw)
        if key not in self._cache:
            grid = self.ac.grids[channel]
            self._cache[key] = ensure_psd(stationary_rect_cov(grid, ph, pw))
        return self._cache[key]


class PerPatchSigma:
    """Per-position covariance fetched from a whole-window covariance."""

    position_independent = False

    def __init__(self, window_covs: list):
        self.window_covs = window_covs

    def sigma(self, channel: int, i: int, j: int, ph: int, pw: int) -> np.ndarray:
        return extract_rect_sigma(self.window_covs[channel], (i, j), ph, pw)


class FixedSigma:
    """A single covariance used for every candidate (synthetic runs)."""

    position_independent = True

    def __init__(self, sigma: np.ndarray):
        self._sigma = sigma

    def sigma(self, channel: int, i: int, j: int, ph: int, pw: int) -> np.ndarray:
        return self._sigma


def window_sigma_source(ts: TrainingSet) -> PerPatchSigma:
    """Estimate one whole-window covariance per channel from the
    training windows themselves."""
    g = ts.geometry
    if g is None:
        raise MissingGeometry("per-patch sigma needs feature geometry")
    per_channel = ts.features.reshape(ts.n, g.channels, g.height * g.width)
    covs = [
        window_covariance(per_channel[:, c, :], g.height, g.width)
        for c in range(g.channels)
    ]
    return PerPatchSigma(covs)


# --- split search ---


def _weight_halves(ts: TrainingSet, weights):
    w = ts.weights if weights is None else weights
    wpos = np.where(ts.labels == 1, w, 0.0)
    wneg = np.where(ts.labels == -1, w, 0.0)
    return wpos, wneg


def best_orthogonal_split(ts: TrainingSet, subset=None, weights=None):
    """Exhaustive scan over all features and midpoint thresholds.

    Returns (Split, weighted error within the subset); the error is not
    renormalized.  Raises DegenerateNode when the subset is single-class
    or no feature takes two distinct values on it.
    """
    mask = _as_mask(ts.n, subset)
    wpos, wneg = _weight_halves(ts, weights)
    f, threshold, err = ts.kernel.best(mask, wpos, wneg)
    return Split(kind="orthogonal", threshold=threshold, feature=f), err


def _as_mask(n: int, subset) -> np.ndarray:
    if subset is None:
        return np.ones(n, dtype=bool)
    subset = np.asarray(subset)
    if subset.dtype == bool:
        return subset
    mask = np.zeros(n, dtype=bool)
    mask[subset] = True
    return mask


def _enumerate_patches(g: FeatureGeometry, m: int):
    """All (channel, i, j) patch positions, channel-major then row-major.

    Patches are m x m clipped to the window extent, so degenerate
    windows (e.g. a 1 x 2 synthetic pair) still yield one candidate.
    """
    ph, pw = min(m, g.height), min(m, g.width)
    out = []
    for c in range(g.channels):
        for i in range(g.height - ph + 1):
            for j in range(g.width - pw + 1):
                out.append((c, i, j))
    return out, ph, pw


class ObliqueSplitter:
    """Candidate LDA directions and projections, refreshed periodically.

    ``refresh`` recomputes every candidate's direction from the current
    boosting weights over the full training set and caches the projected
    features; ``best_split`` then runs the same threshold scan as the
    orthogonal search over the cached projections.
    """

    def __init__(self, ts: TrainingSet, cfg: BoostConfig, sigma_source):
        if ts.geometry is None:
            raise MissingGeometry("oblique splits need feature geometry")
        self.ts = ts
        self.cfg = cfg
        self.sigma_source = sigma_source
        self.candidates, self.ph, self.pw = _enumerate_patches(ts.geometry, cfg.m)
        self.patch_idx = np.stack(
            [
                ts.geometry.patch_indices(c, i, j, self.ph, self.pw)
                for (c, i, j) in self.candidates
            ]
        )
        self.directions = None
        self.projections = None
        self.kernel = None
        self.projection_updates = 0

    def refresh(self, weights: np.ndarray) -> None:
        y = self.ts.labels
        x = self.ts.features
        wpos = np.where(y == 1, weights, 0.0)
        wneg = np.where(y == -1, weights, 0.0)
        mass_pos, mass_neg = wpos.sum(), wneg.sum()
        if mass_pos <= 0.0 or mass_neg <= 0.0:
            raise DegenerateNode("a class lost all its weight")
        mu_diff_full = wpos @ x / mass_pos - wneg @ x / mass_neg
        pdim = self.ph * self.pw
        directions = np.empty((len(self.candidates), pdim))
        if getattr(self.sigma_source, "position_independent", False):
            # one solve per channel covers all patch positions at once
            channels = np.array([c for (c, _, _) in self.candidates])
            for c in np.unique(channels):
                rows = np.flatnonzero(channels == c)
                sigma = self.sigma_source.sigma(int(c), 0, 0, self.ph, self.pw)
                diffs = mu_diff_full[self.patch_idx[rows]]
                directions[rows] = lda_directions(diffs, sigma, self.cfg.eps)
        else:
            for c_idx, (c, i, j) in enumerate(self.candidates):
                sigma = self.sigma_source.sigma(c, i, j, self.ph, self.pw)
                directions[c_idx] = lda_directions(
                    mu_diff_full[self.patch_idx[c_idx]], sigma, self.cfg.eps
                )[0]
        proj = np.empty((self.ts.n, len(self.candidates)))
        for c_idx in range(len(self.candidates)):
            proj[:, c_idx] = x[:, self.patch_idx[c_idx]] @ directions[c_idx]
        self.directions = directions
        self.projections = proj
        self.kernel = _ScanKernel(proj)
        self.projection_updates += 1

    def best_split(self, subset=None, weights=None):
        if self.kernel is None:
            raise DegenerateNode("splitter not refreshed")
        mask = _as_mask(self.ts.n, subset)
        wpos, wneg = _weight_halves(self.ts, weights)
        cand, threshold, err = self.kernel.best(mask, wpos, wneg)
        c, i, j = self.candidates[cand]
        split = Split(
            kind="oblique",
            threshold=threshold,
            channel=c,
            top_left=(i, j),
            patch_shape=(self.ph, self.pw),
            w=self.directions[cand].copy(),
        )
        return split, err, self.projections[:, cand]


def best_oblique_split(ts: TrainingSet, subset, cfg: BoostConfig, sigma_source,
                       weights=None):
    """Single-node oblique search: weighted class means over the subset,
    one LDA direction per (channel, patch) candidate, then the midpoint
    threshold scan over the projections.

    Returns (Split, weighted error).  Candidate ties break to the first
    candidate in (channel, row, col) order, then the lowest threshold.
    """
    if ts.geometry is None:
        raise MissingGeometry("oblique splits need feature geometry")
    mask = _as_mask(ts.n, subset)
    w = ts.weights if weights is None else weights
    sub_w = np.where(mask, w, 0.0)
    splitter = ObliqueSplitter(ts, cfg, sigma_source)
    splitter.refresh(sub_w)
    split, err, _ = splitter.best_split(mask, weights)
    return split, err


# --- tree training and evaluation ---


def _leaf_value(wpos: float, wneg: float, beta: float) -> float:
    return 0.5 * math.log((wpos + beta) / (wneg + beta))


def train_tree(ts: TrainingSet, cfg: BoostConfig, weights=None,
               split_finder=None) -> Tree:
    """Greedy recursive tree on the given boosting weights.

    ``split_finder(mask, weights) -> (Split, err, full_values)`` defaults
    to the exhaustive orthogonal search; nodes whose search raises
    DegenerateNode (or at max depth) become leaves with value
    0.5*ln((W+ + beta)/(W- + beta)).
    """
    w = ts.weights if weights is None else weights
    beta = cfg.leaf_smoothing if cfg.leaf_smoothing is not None else 1.0 / ts.n
    if split_finder is None:
        def split_finder(mask, wvec):
            split, err = best_orthogonal_split(ts, mask, wvec)
            return split, err, ts.features[:, split.feature]

    splits: list = []
    left: list[int] = []
    right: list[int] = []
    values: list[float] = []

    def new_node():
        splits.append(None)
        left.append(-1)
        right.append(-1)
        values.append(0.0)
        return len(splits) - 1

    def build(mask: np.ndarray, depth: int) -> int:
        node = new_node()
        split = None
        if depth < cfg.max_depth:
            try:
                split, _, zfull = split_finder(mask, w)
            except DegenerateNode:
                split = None
        if split is None:
            wpos = float(w[mask & (ts.labels == 1)].sum())
            wneg = float(w[mask & (ts.labels == -1)].sum())
            values[node] = _leaf_value(wpos, wneg, beta)
            return node
        splits[node] = split
        go_right = zfull > split.threshold
        left[node] = build(mask & ~go_right, depth + 1)
        right[node] = build(mask & go_right, depth + 1)
        return node

    build(_as_mask(ts.n, None), 0)
    return Tree(
        tuple(splits),
        np.asarray(left, dtype=np.int32),
        np.asarray(right, dtype=np.int32),
        np.asarray(values, dtype=np.float64),
    )


def tree_scores(tree: Tree, x: np.ndarray, geometry=None) -> np.ndarray:
    """Vectorized evaluation of one tree on rows of ``x``."""
    out = np.zeros(x.shape[0])
    stack = [(0, np.arange(x.shape[0]))]
    while stack:
        node, idx = stack.pop()
        split = tree.splits[node]
        if split is None:
            out[idx] = tree.values[node]
            continue
        go_right = split.goes_right(x[idx], geometry)
        stack.append((int(tree.left[node]), idx[~go_right]))
        stack.append((int(tree.right[node]), idx[go_right]))
    return out


# --- boosting ---


def _make_splitter(ts: TrainingSet, cfg: BoostConfig, sigma_source):
    if cfg.split_policy == "orthogonal":
        return None
    if sigma_source is None:
        if cfg.split_policy == "oblique_per_patch":
            sigma_source = window_sigma_source(ts)
        else:
            raise ConfigError(
                "oblique_shared needs an explicit sigma source "
                "(stationary covariance of the channel statistics)"
            )
    return ObliqueSplitter(ts, cfg, sigma_source)


def train_realboost(ts: TrainingSet, cfg: BoostConfig, harvester=None,
                    sigma_source=None) -> BoostedEnsemble:
    """RealBoost: weights w_i proportional to exp(-y_i F(x_i)),
    renormalized every round; one tree per round.

    At each bootstrap-schedule checkpoint (tree counts below num_trees,
    only when a ``harvester(partial_ensemble, max_count) -> features``
    is supplied), top-scoring false positives are appended as new
    negatives, capped at cfg.negatives_cap total negatives, and training
    continues.  A checkpoint that harvests nothing is recorded as a
    warning, not an error.  Cascade thresholds start at -inf.
    """
    features = ts.features
    labels = ts.labels
    geometry = ts.geometry
    current = ts
    weights = ts.weights.copy()
    scores = np.zeros(current.n)
    splitter = _make_splitter(current, cfg, sigma_source)
    trees: list[Tree] = []
    warnings: list[str] = []
    schedule = sorted(
        {int(s) for s in cfg.bootstrap_schedule if 0 < s < cfg.num_trees}
    ) if harvester is not None else []

    def finder(mask, wvec):
        if splitter is not None:
            return splitter.best_split(mask, wvec)
        split, err = best_orthogonal_split(current, mask, wvec)
        return split, err, current.features[:, split.feature]

    refresh_due = True
    for t in range(cfg.num_trees):
        if splitter is not None and refresh_due:
            splitter.refresh(weights)
            refresh_due = False
        tree = train_tree(current, cfg, weights=weights, split_finder=finder)
        trees.append(tree)
        scores += tree_scores(tree, features, geometry)
        raw = np.exp(-labels * scores)
        weights = raw / raw.sum()
        if splitter is not None and not math.isinf(cfg.update_period):
            if (t + 1) % int(cfg.update_period) == 0:
                refresh_due = True
        if (t + 1) in schedule:
            room = cfg.negatives_cap - int(np.count_nonzero(labels == -1))
            if room <= 0:
                warnings.append(f"negatives_cap_reached@{t + 1}")
                continue
            partial = BoostedEnsemble(
                tuple(trees),
                np.full(len(trees), -np.inf),
                cfg,
                features.shape[1],
                geometry,
            )
            new_negatives = np.asarray(harvester(partial, room), dtype=np.float64)
            if len(new_negatives) == 0:
                warnings.append(f"no_negatives_harvested@{t + 1}")
                continue
            features = np.vstack([features, new_negatives])
            labels = np.concatenate(
                [labels, np.full(len(new_negatives), -1, dtype=np.int8)]
            )
            new_scores = score_matrix(
                BoostedEnsemble(
                    tuple(trees), np.full(len(trees), -np.inf), cfg,
                    features.shape[1], geometry,
                ),
                new_negatives,
            )[0]
            scores = np.concatenate([scores, new_scores])
            raw = np.exp(-labels * scores)
            weights = raw / raw.sum()
            current = TrainingSet(features, labels, weights.copy(), geometry)
            splitter = _make_splitter(current, cfg, sigma_source)
            refresh_due = True

    return BoostedEnsemble(
        tuple(trees),
        np.full(cfg.num_trees, -np.inf),
        cfg,
        features.shape[1],
        geometry,
        tuple(warnings),
    )


def score_matrix(ens: BoostedEnsemble, x: np.ndarray, use_cascade: bool = False):
    """Score rows of ``x``; returns (scores, rejected_at) where
    rejected_at[i] is the tree index whose cascade threshold rejected
    sample i, or -1 if it survived every prefix."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != ens.feature_dim:
        raise DimensionMismatch(
            f"sample dim {x.shape[1]} != ensemble dim {ens.feature_dim}"
        )
    n = x.shape[0]
    scores = np.zeros(n)
    rejected = np.full(n, -1, dtype=np.int64)
    active = np.arange(n)
    for t, tree in enumerate(ens.trees):
        scores[active] += tree_scores(tree, x[active], ens.geometry)
        if use_cascade:
            thr = ens.thresholds[t]
            below = scores[active] < thr
            if np.any(below):
                rejected[active[below]] = t
                active = active[~below]
                if active.size == 0:
                    break
    return scores, rejected


def score(ens: BoostedEnsemble, x: np.ndarray, use_cascade: bool = False):
    """Single-sample score; returns (score, rejected_at or None)."""
    scores, rejected = score_matrix(ens, np.asarray(x)[None, :], use_cascade)
    return float(scores[0]), (int(rejected[0]) if rejected[0] >= 0 else None)


def prefix_scores(ens: BoostedEnsemble, x: np.ndarray) -> np.ndarray:
    """Cumulative ensemble scores after each tree, shape (n, num_trees)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    out = np.zeros((x.shape[0], ens.num_trees))
    acc = np.zeros(x.shape[0])
    for t, tree in enumerate(ens.trees):
        acc = acc + tree_scores(tree, x, ens.geometry)
        out[:, t] = acc
    return out


def calibrate_cascade(ens: BoostedEnsemble, positives: np.ndarray,
                      margin: float = 0.05) -> BoostedEnsemble:
    """Set threshold[t] to the minimum positive prefix score after tree
    t, minus the margin; no calibration positive is ever rejected."""
    positives = np.atleast_2d(positives)
    if positives.shape[0] < 1:
        raise EmptyPositives("cascade calibration needs at least one positive")
    prefixes = prefix_scores(ens, positives)
    thresholds = prefixes.min(axis=0) - margin
    return replace(ens, thresholds=thresholds)


def exponential_loss(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mean exp(-y*F), RealBoost's training objective."""
    return float(np.mean(np.exp(-labels * scores)))


# --- serialization ---

_MAGIC = b"LDCFENS1"
_KIND_CODE = {"leaf": 0, "orthogonal": 1, "oblique": 2}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


def _config_to_json(cfg: BoostConfig) -> dict:
    d = {
        "num_trees": cfg.num_trees,
        "max_depth": cfg.max_depth,
        "split_policy": cfg.split_policy,
        "update_period": "inf" if math.isinf(cfg.update_period) else cfg.update_period,
        "eps": cfg.eps,
        "m": cfg.m,
        "bootstrap_schedule": list(cfg.bootstrap_schedule),
        "negatives_cap": cfg.negatives_cap,
        "harvest_per_image": cfg.harvest_per_image,
        "leaf_smoothing": cfg.leaf_smoothing,
        "seed": cfg.seed,
    }
    return d


def _config_from_json(d: dict) -> BoostConfig:
    period = d["update_period"]
    return BoostConfig(
        num_trees=d["num_trees"],
        max_depth=d["max_depth"],
        split_policy=d["split_policy"],
        update_period=math.inf if period == "inf" else period,
        eps=d["eps"],
        m=d["m"],
        bootstrap_schedule=tuple(d["bootstrap_schedule"]),
        negatives_cap=d["negatives_cap"],
        harvest_per_image=d["harvest_per_image"],
        leaf_smoothing=d["leaf_smoothing"],
        seed=d["seed"],
    )


def save_ensemble(ens: BoostedEnsemble, path) -> None:
    """Versioned binary: magic, JSON header, thresholds, then per tree
    fixed-width node arrays plus concatenated oblique weight vectors."""
    header = {
        "config": _config_to_json(ens.config),
        "feature_dim": ens.feature_dim,
        "geometry": None
        if ens.geometry is None
        else {
            "channels": ens.geometry.channels,
            "height": ens.geometry.height,
            "width": ens.geometry.width,
            "shrink": ens.geometry.shrink,
        },
        "num_trees": ens.num_trees,
        "warnings": list(ens.warnings),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(np.asarray(ens.thresholds, dtype="<f8").tobytes())
        for tree in ens.trees:
            _write_tree(fh, tree)


def _write_tree(fh, tree: Tree) -> None:
    nn = tree.num_nodes
    kinds = np.zeros(nn, dtype=np.uint8)
    feature = np.full(nn, -1, dtype=np.int32)
    threshold = np.full(nn, np.nan)
    channel = np.full(nn, -1, dtype=np.int32)
    pij = np.full((nn, 4), -1, dtype=np.int32)
    wchunks = []
    wlens = np.zeros(nn, dtype=np.int32)
    for k, split in enumerate(tree.splits):
        if split is None:
            continue
        kinds[k] = _KIND_CODE[split.kind]
        threshold[k] = split.threshold
        if split.kind == "orthogonal":
            feature[k] = split.feature
        else:
            channel[k] = split.channel
            pij[k] = (*split.top_left, *split.patch_shape)
            wchunks.append(np.asarray(split.w, dtype="<f8"))
            wlens[k] = len(split.w)
    fh.write(struct.pack("<I", nn))
    for arr, dt in (
        (kinds, "<u1"), (tree.left, "<i4"), (tree.right, "<i4"),
        (feature, "<i4"), (threshold, "<f8"), (tree.values, "<f8"),
        (channel, "<i4"), (pij, "<i4"), (wlens, "<i4"),
    ):
        fh.write(np.ascontiguousarray(arr, dtype=dt).tobytes())
    for chunk in wchunks:
        fh.write(chunk.tobytes())


def load_ensemble(path) -> BoostedEnsemble:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise DataError(f"{path}: not an ensemble file")
        (hlen,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        cfg = _config_from_json(header["config"])
        nt = header["num_trees"]
        thresholds = np.frombuffer(fh.read(8 * nt), dtype="<f8").copy()
        geometry = None
        if header["geometry"] is not None:
            g = header["geometry"]
            geometry = FeatureGeometry(
                g["channels"], g["height"], g["width"], g["shrink"]
            )
        trees = tuple(_read_tree(fh) for _ in range(nt))
    return BoostedEnsemble(
        trees, thresholds, cfg, header["feature_dim"], geometry,
        tuple(header["warnings"]),
    )


def _read_tree(fh) -> Tree:
    (nn,) = struct.unpack("<I", fh.read(4))

    def arr(dt, count, shape=None):
        a = np.frombuffer(fh.read(np.dtype(dt).itemsize * count), dtype=dt).copy()
        return a.reshape(shape) if shape else a

    kinds = arr("<u1", nn)
    left = arr("<i4", nn).astype(np.int32)
    right = arr("<i4", nn).astype(np.int32)
    feature = arr("<i4", nn)
    threshold = arr("<f8", nn)
    values = arr("<f8", nn)
    channel = arr("<i4", nn)
    pij = arr("<i4", nn * 4, (nn, 4))
    wlens = arr("<i4", nn)
    splits = []
    for k in range(nn):
        name = _KIND_NAME[int(kinds[k])]
        if name == "leaf":
            splits.append(None)
        elif name == "orthogonal":
            splits.append(Split(
                kind="orthogonal", threshold=float(threshold[k]),
                feature=int(feature[k]),
            ))
        else:
            w = arr("<f8", int(wlens[k]))
            splits.append(Split(
                kind="oblique", threshold=float(threshold[k]),
                channel=int(channel[k]), top_left=(int(pij[k, 0]), int(pij[k, 1])),
                patch_shape=(int(pij[k, 2]), int(pij[k, 3])), w=w,
            ))
    return Tree(tuple(splits), left, right, values)


def dump_ensemble_text(ens: BoostedEnsemble) -> str:
    """Lossless human-readable dump (repr floats), for diffing."""
    out = io.StringIO()
    print(f"trees {ens.num_trees} feature_dim {ens.feature_dim}", file=out)
    print(f"policy {ens.config.split_policy}", file=out)
    if ens.geometry:
        g = ens.geometry
        print(f"geometry {g.channels} {g.height} {g.width} {g.shrink}", file=out)
    for warning in ens.warnings:
        print(f"warning {warning}", file=out)
    print("thresholds " + " ".join(repr(float(t)) for t in ens.thresholds), file=out)
    for t, tree in enumerate(ens.trees):
        print(f"tree {t} nodes {tree.num_nodes}", file=out)
        for k, split in enumerate(tree.splits):
            if split is None:
                print(f"  node {k} leaf value {tree.values[k]!r}", file=out)
            elif split.kind == "orthogonal":
                print(
                    f"  node {k} orthogonal feature {split.feature} "
                    f"threshold {split.threshold!r} "
                    f"children {tree.left[k]} {tree.right[k]}",
                    file=out,
                )
            else:
                wtxt = " ".join(repr(float(v)) for v in split.w)
                print(
                    f"  node {k} oblique channel {split.channel} "
                    f"at {split.top_left[0]} {split.top_left[1]} "
                    f"shape {split.patch_shape[0]} {split.patch_shape[1]} "
                    f"threshold {split.threshold!r} "
                    f"children {tree.left[k]} {tree.right[k]} w {wtxt}",
                    file=out,
                )
    return out.getvalue()
