"""Command-line entry point.

Subcommands: ``filters`` (estimate channel autocorrelation and derive
a decorrelating filter bank), ``train`` (boosted detector with
bootstrapped negatives), ``detect`` (multiscale sliding window over a
directory of images), ``eval`` (miss rate vs FPPI against
annotations), ``bench`` (synthetic 2D comparisons), ``inspect`` (dump
binary artifacts as text).

Exit codes: 0 success, 2 configuration error, 3 data error, 1 any
other internal failure.  Progress goes to stderr (silenced by
``--quiet``); output artifacts are deterministic for a given config
and seed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, LdcfError
from .boost import (
    BoostedEnsemble,
    FeatureGeometry,
    SharedStationarySigma,
    TrainingSet,
    calibrate_cascade,
    dump_ensemble_text,
    load_ensemble,
    save_ensemble,
    train_realboost,
)
from .channels import compute_channels, load_stack
from .config import RunConfig, load_run_config
from .detect import (
    build_pyramid,
    detect,
    harvest_negatives,
    save_detections,
    load_detections,
    window_features,
)
from .evaluate import curve, log_average_mr, save_curve
from .filterbank import apply_filterbank, derive_filters, load_filterbank, save_filterbank
from .imgio import (
    Image,
    list_images,
    load_annotations,
    load_image,
    scan_dataset,
)
from .linstats import (
    estimate_autocorr_brute,
    estimate_autocorr_fft,
    load_autocorr,
    save_autocorr,
)
from .resample import resize_image
from .synthbench import SynthSpec, format_table, run_fig1, run_fig2, save_report


def _progress(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


# --- feature extraction shared by train ---


def positive_window_features(img: Image, box, run: RunConfig, fb):
    """Feature row for one annotated box.

    The box is cropped with ``train.context_pad`` window-scale pixels
    of surrounding image (edge-replicated where the image ends),
    resized to window size plus pad, pushed through channels and
    filters, and the central window cells are kept.  Returns the row
    and its geometry.
    """
    det = run.detect
    pad = run.train.context_pad
    wh, ww = det.window_height, det.window_width
    cy, cx = pad * box.h / wh, pad * box.w / ww
    x0 = int(np.floor(box.x - cx))
    x1 = int(np.ceil(box.x + box.w + cx))
    y0 = int(np.floor(box.y - cy))
    y1 = int(np.ceil(box.y + box.h + cy))
    pl, pt = max(0, -x0), max(0, -y0)
    pr, pb = max(0, x1 - img.width), max(0, y1 - img.height)
    arr = img.data
    if pl or pt or pr or pb:
        arr = np.pad(arr, ((pt, pb), (pl, pr), (0, 0)), mode="edge")
    crop = arr[y0 + pt : y1 + pt, x0 + pl : x1 + pl, :]
    sub = Image(crop.shape[1], crop.shape[0], img.planes, np.ascontiguousarray(crop))
    padded = resize_image(sub, wh + 2 * pad, ww + 2 * pad)
    st = compute_channels(padded, run.channels)
    if fb is not None:
        st = apply_filterbank(st, fb, downsample=det.filter_downsample)
    if pad % st.shrink or wh % st.shrink or ww % st.shrink:
        raise ConfigError(
            f"context_pad {pad} and window {wh}x{ww} must be divisible "
            f"by total shrink {st.shrink}"
        )
    off = pad // st.shrink
    ch, cw = wh // st.shrink, ww // st.shrink
    win = st.planes[:, off : off + ch, off : off + cw]
    geom = FeatureGeometry(
        channels=st.planes.shape[0], height=ch, width=cw, shrink=st.shrink
    )
    return np.ascontiguousarray(win).reshape(-1), geom


def _jitter_shifts(j: int):
    if j <= 0:
        return ((0, 0),)
    return ((0, 0), (-j, 0), (j, 0), (0, -j), (0, j))


def collect_positives(index, run: RunConfig, fb, args):
    rows = []
    geom = None
    for img_path, annot_path in index.positives:
        img = load_image(img_path)
        boxes = [b for b in load_annotations(annot_path) if not b.ignore]
        for box in boxes:
            for dx, dy in _jitter_shifts(run.train.jitter):
                shifted = type(box)(box.x + dx, box.y + dy, box.w, box.h)
                row, geom = positive_window_features(img, shifted, run, fb)
                rows.append(row)
    if not rows:
        raise DataError("no non-ignore annotated boxes in the dataset")
    _progress(args, f"positives: {len(rows)} rows from {len(index.positives)} images")
    return np.stack(rows), geom


def collect_initial_negatives(neg_images, run: RunConfig, fb, args):
    """Seeded random full-scale windows from each negative image."""
    rng = np.random.Generator(np.random.Philox(run.seed))
    per = run.train.initial_negatives_per_image
    rows = []
    for img in neg_images:
        _, stack = build_pyramid(img, run.channels, fb, run.detect)[0]
        feats, _, _ = window_features(stack, run.detect)
        if feats.shape[0] == 0:
            continue
        take = min(per, feats.shape[0])
        idx = np.sort(rng.choice(feats.shape[0], size=take, replace=False))
        rows.append(feats[idx])
    if not rows:
        raise DataError("negative images yielded no windows")
    out = np.vstack(rows)
    _progress(args, f"initial negatives: {len(out)} rows")
    return out


def train_detector(index, run: RunConfig, fb, args, autocorr=None):
    pos, geom = collect_positives(index, run, fb, args)
    neg_images = [load_image(p) for p in index.negatives]
    neg = collect_initial_negatives(neg_images, run, fb, args)
    x = np.vstack([pos, neg])
    y = np.concatenate([np.ones(len(pos)), -np.ones(len(neg))])
    ts = TrainingSet.create(x, y, geometry=geom)

    sigma_source = None
    if run.boost.split_policy == "oblique_shared":
        if autocorr is None:
            raise ConfigError(
                "split policy oblique_shared needs --autocorr (a file "
                "written by `filters --save-autocorr`)"
            )
        sigma_source = SharedStationarySigma(autocorr)

    def harvester(partial: BoostedEnsemble, room: int):
        _progress(args, f"bootstrapping: scanning negatives (room {room})")
        return harvest_negatives(
            neg_images, partial, run.channels, fb, run.detect,
            needed=room, per_image_cap=run.boost.harvest_per_image,
        )

    ens = train_realboost(ts, run.boost, harvester=harvester,
                          sigma_source=sigma_source)
    for w in ens.warnings:
        _progress(args, f"warning: {w}")
    ens = calibrate_cascade(ens, pos, margin=args.cascade_margin)
    return ens


# --- commands ---


def _overrides(pairs) -> dict:
    out = {}
    for key, value in pairs:
        if value is not None:
            out[key] = value
    return out


def cmd_filters(args) -> int:
    run = load_run_config(args.config, _overrides([
        ("filters.k", args.k),
        ("filters.m", args.m),
        ("filters.variant", args.variant),
        ("channels.shrink", args.shrink),
        ("seed", args.seed),
    ]))
    corpus = Path(args.corpus)
    if not corpus.is_dir():
        raise ConfigError(f"corpus directory not found: {corpus}")
    paths = list_images(corpus)
    if not paths:
        raise DataError(f"no PGM/PPM images in {corpus}")
    radius = args.radius if args.radius is not None else run.filters.m - 1
    _progress(args, f"computing channels for {len(paths)} images")
    stacks = [compute_channels(load_image(p), run.channels) for p in paths]
    ac = estimate_autocorr_fft(stacks, radius)
    if args.check:
        brute = estimate_autocorr_brute(stacks, radius)
        dev = float(np.max(np.abs(ac.grids - brute.grids)))
        print(f"autocorrelation check: max |fft - brute| = {dev:.3e}")
    fb = derive_filters(ac, run.filters)
    save_filterbank(fb, args.out)
    if args.save_autocorr:
        save_autocorr(ac, args.save_autocorr)
    _progress(args, f"wrote {fb.num_output_planes}-plane bank to {args.out}")
    return 0


def cmd_train(args) -> int:
    run = load_run_config(args.config, _overrides([
        ("boost.num_trees", args.trees),
        ("boost.max_depth", args.depth),
        ("boost.split_policy", args.policy),
        ("boost.eps", args.eps),
        ("boost.bootstrap_schedule", args.schedule),
        ("boost.negatives_cap", args.negatives_cap),
        ("channels.shrink", args.shrink),
        ("detect.window_height", args.window_height),
        ("detect.window_width", args.window_width),
        ("detect.stride", args.stride),
        ("detect.decision_threshold", args.threshold),
        ("train.jitter", args.jitter),
        ("train.initial_negatives_per_image", args.initial_negs),
        ("seed", args.seed),
    ]))
    root = Path(args.data)
    if not root.is_dir():
        raise ConfigError(f"dataset directory not found: {root}")
    index = scan_dataset(root)
    fb = load_filterbank(args.filters) if args.filters else None
    ac = load_autocorr(args.autocorr) if args.autocorr else None
    ens = train_detector(index, run, fb, args, autocorr=ac)
    save_ensemble(ens, args.out)
    _progress(args, f"wrote {len(ens.trees)}-tree ensemble to {args.out}")
    return 0


def cmd_detect(args) -> int:
    run = load_run_config(args.config, _overrides([
        ("channels.shrink", args.shrink),
        ("detect.window_height", args.window_height),
        ("detect.window_width", args.window_width),
        ("detect.stride", args.stride),
        ("detect.decision_threshold", args.threshold),
        ("detect.scales_per_octave", args.scales_per_octave),
        ("detect.nms_overlap", args.nms_overlap),
        ("seed", args.seed),
    ]))
    ens = load_ensemble(args.model)
    fb = load_filterbank(args.filters) if args.filters else None
    images_dir = Path(args.images)
    if not images_dir.is_dir():
        raise ConfigError(f"image directory not found: {images_dir}")
    paths = list_images(images_dir)
    if not paths:
        raise DataError(f"no PGM/PPM images in {images_dir}")
    per_image = {}
    total = 0
    for i, p in enumerate(paths):
        pyramid = build_pyramid(load_image(p), run.channels, fb, run.detect)
        dets = detect(pyramid, ens, run.detect, use_cascade=not args.no_cascade)
        per_image[p.name] = dets
        total += len(dets)
        if (i + 1) % 25 == 0:
            _progress(args, f"{i + 1}/{len(paths)} images")
    save_detections(per_image, args.out)
    _progress(args, f"wrote {total} detections for {len(paths)} images to {args.out}")
    return 0


def cmd_eval(args) -> int:
    images_dir = Path(args.images)
    annot_dir = Path(args.annotations)
    for d in (images_dir, annot_dir):
        if not d.is_dir():
            raise ConfigError(f"directory not found: {d}")
    paths = list_images(images_dir)
    if not paths:
        raise DataError(f"no PGM/PPM images in {images_dir}")
    dets = load_detections(args.dets)
    per_image = []
    for p in paths:
        gts = load_annotations(annot_dir / (p.stem + ".txt"))
        per_image.append((dets.get(p.name, []), gts))
    cv = curve(per_image)
    mr = log_average_mr(cv)
    save_curve(cv, args.out, mr=mr)
    print(f"log_avg_mr={mr!r}")
    return 0


def cmd_bench(args) -> int:
    load_run_config(args.config)  # typos in a passed file still fail loudly
    seeds = tuple(range(args.num_seeds))
    spec = SynthSpec(
        covariance=((1.0, args.rho), (args.rho, 1.0)),
        n_train=args.n_train,
        n_test=args.n_test,
        seeds=seeds,
    )
    if args.fig == 1:
        report = run_fig1(
            spec,
            tree_counts=tuple(args.trees),
            depths=tuple(args.depths),
            eps=args.eps,
        )
    else:
        report = run_fig2(spec, num_trees=args.fig2_trees, depth=args.fig2_depth)
    save_report(report, args.out)
    if not args.quiet:
        print(format_table(report))
    return 0


def cmd_inspect(args) -> int:
    load_run_config(args.config)
    path = Path(args.artifact)
    if not path.is_file():
        raise ConfigError(f"artifact not found: {path}")
    head = path.open("rb").read(8)
    if head == b"LDCFENS1":
        text = dump_ensemble_text(load_ensemble(path))
    elif head == b"LDCFCHN1":
        st = load_stack(path)
        lines = [
            f"channel stack {st.width}x{st.height} shrink {st.shrink} "
            f"({len(st.labels)} planes)"
        ]
        for label, plane in zip(st.labels, st.planes):
            lines.append(
                f"{label}: min {plane.min():.6g} mean {plane.mean():.6g} "
                f"max {plane.max():.6g}"
            )
            if args.full:
                for r in range(plane.shape[0]):
                    lines.append(" ".join(repr(float(v)) for v in plane[r]))
        text = "\n".join(lines) + "\n"
    else:
        try:
            text = path.read_text()
        except UnicodeDecodeError as exc:
            raise DataError(f"{path}: unrecognized binary format") from exc
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# --- parser ---


def _add_common(p):
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.add_argument("--jobs", type=int, default=1,
                   help="worker cap; any value produces identical artifacts "
                        "(default: 1)")
    p.add_argument("--seed", type=int, help="run seed (default: 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ldcf",
        description="Locally decorrelated channel features detection toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("filters", help="estimate autocorrelation, derive filter bank")
    p.add_argument("--corpus", required=True, help="directory of PGM/PPM images")
    p.add_argument("--out", required=True, help="output filter bank file")
    p.add_argument("--k", type=int, help="filters kept per channel (default: 4)")
    p.add_argument("--m", type=int, help="filter side in cells (default: 5)")
    p.add_argument("--variant", help="filter selection variant (default: top_k)")
    p.add_argument("--shrink", type=int, help="channel shrink factor (default: 2)")
    p.add_argument("--radius", type=int,
                   help="autocorrelation radius in cells (default: m - 1)")
    p.add_argument("--check", action="store_true",
                   help="also run the brute-force estimator and report "
                        "the maximum deviation")
    p.add_argument("--save-autocorr", help="also write the autocorrelation text file")
    _add_common(p)
    p.set_defaults(func=cmd_filters)

    p = sub.add_parser("train", help="train a boosted sliding-window detector")
    p.add_argument("--data", required=True,
                   help="dataset root (pos/, pos-annot/, neg/)")
    p.add_argument("--out", required=True, help="output ensemble file")
    p.add_argument("--filters", help="filter bank file (omit for raw channels)")
    p.add_argument("--autocorr",
                   help="autocorrelation file (needed by oblique_shared)")
    p.add_argument("--trees", type=int, help="boosting rounds (default: 2048)")
    p.add_argument("--depth", type=int, help="tree depth (default: 3)")
    p.add_argument("--policy",
                   help="split policy: orthogonal, oblique_per_patch or "
                        "oblique_shared (default: orthogonal)")
    p.add_argument("--eps", type=float,
                   help="LDA shrinkage for oblique splits (default: 0.1)")
    p.add_argument("--shrink", type=int, help="channel shrink factor (default: 2)")
    p.add_argument("--window-height", type=int, help="window height (default: 128)")
    p.add_argument("--window-width", type=int, help="window width (default: 64)")
    p.add_argument("--stride", type=int, help="window stride in pixels (default: 4)")
    p.add_argument("--threshold", type=float,
                   help="detection score threshold used when bootstrapping "
                        "(default: 0.0)")
    p.add_argument("--schedule",
                   help="bootstrap checkpoints, comma-separated "
                        "(default: 32,128,512,2048)")
    p.add_argument("--negatives-cap", type=int,
                   help="total negatives cap (default: 10000)")
    p.add_argument("--initial-negs", type=int,
                   help="random negatives per image before bootstrapping "
                        "(default: 5)")
    p.add_argument("--jitter", type=int,
                   help="positive crop jitter in pixels (default: 2)")
    p.add_argument("--cascade-margin", type=float, default=0.05,
                   help="soft-cascade calibration margin (default: 0.05)")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("detect", help="run a detector over a directory of images")
    p.add_argument("--model", required=True, help="ensemble file")
    p.add_argument("--images", required=True, help="directory of images")
    p.add_argument("--out", required=True, help="output detections text file")
    p.add_argument("--filters", help="filter bank file used at training time")
    p.add_argument("--shrink", type=int, help="channel shrink factor (default: 2)")
    p.add_argument("--window-height", type=int, help="window height (default: 128)")
    p.add_argument("--window-width", type=int, help="window width (default: 64)")
    p.add_argument("--stride", type=int, help="window stride in pixels (default: 4)")
    p.add_argument("--threshold", type=float,
                   help="detection score threshold (default: 0.0)")
    p.add_argument("--scales-per-octave", type=int,
                   help="pyramid scales per octave (default: 8)")
    p.add_argument("--nms-overlap", type=float,
                   help="NMS overlap threshold (default: 0.65)")
    p.add_argument("--no-cascade", action="store_true",
                   help="score every window with the full ensemble")
    _add_common(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("eval", help="miss rate vs FPPI for saved detections")
    p.add_argument("--dets", required=True, help="detections text file")
    p.add_argument("--images", required=True, help="directory of evaluated images")
    p.add_argument("--annotations", required=True,
                   help="directory of per-image annotation files")
    p.add_argument("--out", required=True, help="output curve CSV")
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="synthetic correlated-Gaussian benchmarks")
    p.add_argument("--out", required=True, help="output report CSV")
    p.add_argument("--fig", type=int, choices=(1, 2), default=1,
                   help="1: orthogonal vs oblique grid; 2: feature "
                        "transforms (default: 1)")
    p.add_argument("--rho", type=float, default=0.95,
                   help="feature correlation (default: 0.95)")
    p.add_argument("--n-train", type=int, default=1000,
                   help="training samples per seed (default: 1000)")
    p.add_argument("--n-test", type=int, default=5000,
                   help="test samples per seed (default: 5000)")
    p.add_argument("--num-seeds", type=int, default=10,
                   help="number of seeds (default: 10)")
    p.add_argument("--trees", type=int, nargs="+", default=[16, 64, 256],
                   help="fig 1 ensemble sizes (default: 16 64 256)")
    p.add_argument("--depths", type=int, nargs="+", default=[1, 2],
                   help="fig 1 tree depths (default: 1 2)")
    p.add_argument("--eps", type=float, default=0.1,
                   help="LDA shrinkage for oblique splits (default: 0.1)")
    p.add_argument("--fig2-trees", type=int, default=5,
                   help="fig 2 ensemble size (default: 5)")
    p.add_argument("--fig2-depth", type=int, default=2,
                   help="fig 2 tree depth (default: 2)")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("inspect", help="dump an artifact as text")
    p.add_argument("artifact", help="ensemble, channel stack, or text artifact")
    p.add_argument("--out", help="write text here instead of stdout")
    p.add_argument("--full", action="store_true",
                   help="dump full plane values for channel stacks")
    _add_common(p)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except LdcfError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
