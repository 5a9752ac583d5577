#!/usr/bin/env python3
"""Pre-registered oracle run that freezes enforcement margins.

Runs the two synthetic benchmarks and the desk-scale detection
comparison at the exact settings the acceptance tests use, then
writes tests/frozen_margins.json.  The tests enforce the directional
claims with these margins: half the observed mean gap for each
inequality, twice the observed difference (floored) for the
near-equality.  Refuses to write if any directional claim fails at
freeze time, so a frozen file always certifies a healthy baseline.

Deterministic: rerunning produces an identical file apart from the
recorded date and timings.
"""

import argparse
import datetime
import json
import sys
import time
from pathlib import Path

import numpy as np

from ldcf.deskrun import run_desk_comparison
from ldcf.synthbench import SynthSpec, run_fig1, run_fig2

DESK_SEEDS = (0, 1, 2, 3, 4)


def grid_margins():
    spec = SynthSpec()
    t0 = time.perf_counter()
    grid = run_fig1(spec)
    transforms = run_fig2(spec)
    elapsed = time.perf_counter() - t0

    cells = {}
    by_key = {(a["method"], a["num_trees"], a["depth"]): a["test_mean"]
              for a in grid.aggregates()}
    for (method, t, d) in sorted(by_key):
        if method != "orthogonal":
            continue
        orth = by_key[("orthogonal", t, d)]
        obl = by_key[("oblique", t, d)]
        gap = orth - obl
        if gap <= 0.0:
            sys.exit(f"refusing to freeze: oblique not better at T={t} D={d}")
        cells[f"T{t}_D{d}"] = {
            "orthogonal_mean": orth,
            "oblique_mean": obl,
            "min_gap": gap / 2.0,
        }

    means = {a["method"]: a["test_mean"] for a in transforms.aggregates()}
    decorr_gap = means["none"] - means["decorrelate"]
    if decorr_gap <= 0.0:
        sys.exit("refusing to freeze: decorrelation not better than raw")
    zca_dev = abs(means["zca_whiten"] - means["none"])
    return {
        "spec": {"rho": 0.95, "n_train": spec.n_train,
                 "n_test": spec.n_test, "num_seeds": len(spec.seeds)},
        "seconds": round(elapsed, 1),
        "cells": cells,
        "transform_means": means,
        "min_gap_decorrelate_vs_none": decorr_gap / 2.0,
        "max_abs_zca_minus_none": max(2.0 * zca_dev, 0.01),
    }


def desk_margins():
    per_seed = []
    total = 0.0
    for seed in DESK_SEEDS:
        r = run_desk_comparison(seed)
        total += r.seconds
        per_seed.append({
            "seed": r.seed,
            "raw_mr": r.raw_mr,
            "decorrelated_mr": r.decorrelated_mr,
            "seconds": round(r.seconds, 1),
        })
        print(f"  desk seed {r.seed}: raw {r.raw_mr:.4f} vs "
              f"decorrelated {r.decorrelated_mr:.4f} ({r.seconds:.0f}s)",
              flush=True)
    raw_mean = float(np.mean([p["raw_mr"] for p in per_seed]))
    dec_mean = float(np.mean([p["decorrelated_mr"] for p in per_seed]))
    gap = raw_mean - dec_mean
    if gap < 0.0:
        sys.exit("refusing to freeze: decorrelated mean MR above raw mean MR")
    return {
        "per_seed": per_seed,
        "raw_mean_mr": raw_mean,
        "decorrelated_mean_mr": dec_mean,
        "min_mean_gap": gap / 2.0,
        "total_seconds": round(total, 1),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=None,
                    help="output path (default: tests/frozen_margins.json "
                         "next to this repository's tests)")
    args = ap.parse_args()
    out = Path(args.out) if args.out else (
        Path(__file__).resolve().parent.parent / "tests" / "frozen_margins.json"
    )

    print("running synthetic benchmark grid...", flush=True)
    grid = grid_margins()
    print(f"  done in {grid['seconds']}s", flush=True)
    print("running desk comparisons...", flush=True)
    desk = desk_margins()
    print(f"  done in {desk['total_seconds']}s", flush=True)

    payload = {
        "frozen_on": datetime.date.today().isoformat(),
        "synth": grid,
        "desk": desk,
    }
    out.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
