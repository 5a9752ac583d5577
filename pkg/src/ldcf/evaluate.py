"""Detection evaluation: greedy matching against ground truth, miss
rate vs false-positives-per-image curves, and the log-average miss
rate over log-spaced FPPI reference points in [1e-2, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyCurve, NoGroundTruth
from .detect import Detection
from .imgio import GroundTruthBox

MATCH_TP, MATCH_FP, MATCH_IGNORED = 1, 0, -1


@dataclass(frozen=True, eq=False)
class EvalCurve:
    """Operating points ordered by descending score threshold, so fppi
    is non-decreasing along the arrays."""

    thresholds: np.ndarray
    fppi: np.ndarray
    miss_rate: np.ndarray
    num_images: int
    num_gt: int

    def __post_init__(self):
        if not (len(self.thresholds) == len(self.fppi) == len(self.miss_rate)):
            raise ValueError("curve arrays must align")


def _iou(d: Detection, g: GroundTruthBox) -> float:
    ix = max(0.0, min(d.x + d.w, g.x + g.w) - max(d.x, g.x))
    iy = max(0.0, min(d.y + d.h, g.y + g.h) - max(d.y, g.y))
    inter = ix * iy
    if inter <= 0.0:
        return 0.0
    union = d.w * d.h + g.w * g.h - inter
    return inter / union


def match_detections(dets: list, gts: list, iou_threshold: float = 0.5):
    """Greedy per-image matching in descending score order.

    Each detection takes the highest-IoU unmatched non-ignore box with
    IoU >= threshold (a true positive); ties go to the lowest box
    index.  Failing that, an ignore box at or above the threshold
    absorbs it: neither TP nor FP, and ignore boxes are never consumed.
    Everything else is a false positive.

    Returns (labels, matched) where ``labels`` holds MATCH_TP /
    MATCH_FP / MATCH_IGNORED per detection in descending score order
    (stable on ties) and ``matched`` flags each ground-truth box.
    """
    order = sorted(range(len(dets)), key=lambda i: -dets[i].score)
    labels = np.zeros(len(dets), dtype=np.int8)
    matched = np.zeros(len(gts), dtype=bool)
    for i in order:
        best_j, best_iou = -1, -1.0
        for j, g in enumerate(gts):
            if g.ignore or matched[j]:
                continue
            v = _iou(dets[i], g)
            if v >= iou_threshold and v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0:
            matched[best_j] = True
            labels[i] = MATCH_TP
            continue
        absorbed = any(
            g.ignore and _iou(dets[i], g) >= iou_threshold for g in gts
        )
        labels[i] = MATCH_IGNORED if absorbed else MATCH_FP
    return labels[order], matched


def curve(per_image: list) -> EvalCurve:
    """Sweep the decision threshold over every distinct detection score.

    ``per_image`` holds (detections, ground truths) pairs, one pair per
    image.  FPPI is false positives divided by the image count; miss
    rate is the fraction of non-ignore ground truths left unmatched.  A
    detector that emits nothing yields the single point (fppi 0, miss
    1).
    """
    if not per_image:
        raise NoGroundTruth("need at least one image")
    scores, labels = [], []
    num_gt = 0
    for dets, gts in per_image:
        det_labels, _ = match_detections(dets, gts)
        scores.extend(sorted((d.score for d in dets), reverse=True))
        labels.extend(det_labels)
        num_gt += sum(1 for g in gts if not g.ignore)
    if num_gt == 0:
        raise NoGroundTruth("no non-ignore ground-truth boxes")
    n_img = len(per_image)
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int8)
    if scores.size == 0:
        return EvalCurve(
            np.array([np.inf]), np.array([0.0]), np.array([1.0]), n_img, num_gt
        )
    order = np.argsort(-scores, kind="stable")
    scores = scores[order]
    labels = labels[order]
    cum_tp = np.cumsum(labels == MATCH_TP)
    cum_fp = np.cumsum(labels == MATCH_FP)
    # last index of each distinct score = counts with threshold at that score
    distinct = np.flatnonzero(np.r_[scores[1:] != scores[:-1], True])
    thr = scores[distinct]
    fppi = cum_fp[distinct] / n_img
    miss = 1.0 - cum_tp[distinct] / num_gt
    return EvalCurve(thr, fppi.astype(np.float64), miss.astype(np.float64),
                     n_img, num_gt)


def log_average_mr(c: EvalCurve, num_points: int = 9,
                   lo: float = 1e-2, hi: float = 1.0) -> float:
    """Geometric mean of the miss rate sampled at log-spaced FPPI
    reference points.

    Each reference uses the curve point with the largest fppi at or
    below it (resolving equal-fppi ties toward the lower miss rate);
    references below the whole curve contribute miss rate 1.  Miss
    rates are floored at 1e-10 before the log.
    """
    if len(c.fppi) == 0:
        raise EmptyCurve("empty evaluation curve")
    refs = np.logspace(np.log10(lo), np.log10(hi), num_points)
    samples = np.empty(num_points)
    for k, ref in enumerate(refs):
        at_or_below = np.flatnonzero(c.fppi <= ref)
        # fppi ascends, so the last match is nearest and lowest-miss
        samples[k] = 1.0 if at_or_below.size == 0 else c.miss_rate[at_or_below[-1]]
    return float(np.exp(np.mean(np.log(np.maximum(samples, 1e-10)))))


def save_curve(c: EvalCurve, path, mr: float | None = None) -> None:
    """CSV ``fppi,miss_rate`` rows at full precision plus a trailing
    comment line carrying the log-average miss rate."""
    lines = ["fppi,miss_rate"]
    for f, m in zip(c.fppi, c.miss_rate):
        lines.append(f"{float(f)!r},{float(m)!r}")
    if mr is None:
        mr = log_average_mr(c)
    lines.append(f"# log_avg_mr={float(mr)!r}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
