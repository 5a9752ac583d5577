"""Desk-scale end-to-end detection comparison.

Trains the same boosted sliding-window detector twice on one seeded
synthetic planted-pattern dataset: once on raw aggregated channels
and once on channels passed through the decorrelating filter bank,
then scores both by log-average miss rate on the held-out split.
One seed runs in about a minute, so the comparison fits on a desk
machine; the filter bank is estimated from the negative training
images only, exactly as a real run would estimate it from background
statistics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from .boost import TrainingSet, BoostConfig, BoostedEnsemble, calibrate_cascade, train_realboost
from .channels import ChannelConfig, compute_channels
from .cli import _jitter_shifts, collect_initial_negatives, positive_window_features
from .config import RunConfig, TrainConfig
from .detect import DetectorConfig, build_pyramid, detect, harvest_negatives
from .evaluate import curve, log_average_mr
from .filterbank import FilterBank, FilterBankConfig, derive_filters
from .imgio import GroundTruthBox
from .linstats import estimate_autocorr_fft
from .synthdata import DeskDataset, DeskSpec, make_desk_dataset

_SILENT = SimpleNamespace(quiet=True)


@dataclass(frozen=True)
class DeskComparison:
    seed: int
    raw_mr: float
    decorrelated_mr: float
    seconds: float
    warnings: tuple


def desk_run_config(seed: int) -> RunConfig:
    """The fixed small-scale configuration: 32x16 windows, 256 depth-2
    trees with one bootstrapping round, and a light negative budget."""
    return RunConfig(
        channels=ChannelConfig(),
        filters=FilterBankConfig(m=5, k=4),
        boost=BoostConfig(
            num_trees=256,
            max_depth=2,
            bootstrap_schedule=(32,),
            negatives_cap=1000,
            harvest_per_image=25,
            seed=seed,
        ),
        detect=DetectorConfig(
            window_height=32,
            window_width=16,
            stride=4,
            scales_per_octave=8,
            decision_threshold=-2.0,
        ),
        train=TrainConfig(jitter=2, context_pad=8, initial_negatives_per_image=3),
        seed=seed,
    )


def desk_filter_bank(ds: DeskDataset, run: RunConfig) -> FilterBank:
    """Bank derived from the negative split's channel autocorrelation."""
    stacks = [compute_channels(img, run.channels) for img in ds.train_neg]
    ac = estimate_autocorr_fft(stacks, radius=run.filters.m - 1)
    return derive_filters(ac, run.filters)


def train_desk_detector(ds: DeskDataset, run: RunConfig, fb) -> BoostedEnsemble:
    """Jittered positives, seeded random negatives, one bootstrap pass,
    then cascade calibration on the positive crops."""
    rows = []
    geom = None
    for img, box in ds.train_pos:
        for dx, dy in _jitter_shifts(run.train.jitter):
            shifted = GroundTruthBox(box.x + dx, box.y + dy, box.w, box.h)
            row, geom = positive_window_features(img, shifted, run, fb)
            rows.append(row)
    pos = np.stack(rows)
    neg_images = list(ds.train_neg)
    neg = collect_initial_negatives(neg_images, run, fb, _SILENT)
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    ts = TrainingSet.create(x, y, geometry=geom)

    def harvester(partial: BoostedEnsemble, room: int):
        return harvest_negatives(
            neg_images, partial, run.channels, fb, run.detect,
            needed=room, per_image_cap=run.boost.harvest_per_image,
        )

    ens = train_realboost(ts, run.boost, harvester=harvester)
    return calibrate_cascade(ens, pos)


def evaluate_desk_detector(ds: DeskDataset, ens: BoostedEnsemble,
                           run: RunConfig, fb) -> float:
    per_image = []
    for img, box in ds.test:
        pyramid = build_pyramid(img, run.channels, fb, run.detect)
        per_image.append((detect(pyramid, ens, run.detect), [box]))
    return log_average_mr(curve(per_image))


def run_desk_comparison(seed: int, spec: DeskSpec | None = None) -> DeskComparison:
    """One full seeded run of both methods on a shared dataset."""
    t0 = time.perf_counter()
    run = desk_run_config(seed)
    ds = make_desk_dataset(spec if spec is not None else DeskSpec(seed=seed))
    fb = desk_filter_bank(ds, run)
    raw = train_desk_detector(ds, run, None)
    dec = train_desk_detector(ds, run, fb)
    raw_mr = evaluate_desk_detector(ds, raw, run, None)
    dec_mr = evaluate_desk_detector(ds, dec, run, fb)
    return DeskComparison(
        seed=seed,
        raw_mr=raw_mr,
        decorrelated_mr=dec_mr,
        seconds=time.perf_counter() - t0,
        warnings=raw.warnings + dec.warnings,
    )
