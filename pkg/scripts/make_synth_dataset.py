#!/usr/bin/env python3
"""Generate a seeded synthetic planted-pattern detection dataset.

Writes the directory layout the training and evaluation commands
expect: pos/, pos-annot/, neg/ for training plus test/, test-annot/
for held-out evaluation.
"""

import argparse

from ldcf.synthdata import DeskSpec, make_desk_dataset, write_desk_dataset


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="dataset root directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n-pos", type=int, default=100,
                    help="positive training images (default: 100)")
    ap.add_argument("--n-neg", type=int, default=100,
                    help="negative training images (default: 100)")
    ap.add_argument("--n-test", type=int, default=100,
                    help="test images (default: 100)")
    ap.add_argument("--image-size", type=int, default=64,
                    help="square image side (default: 64)")
    ap.add_argument("--window-height", type=int, default=32)
    ap.add_argument("--window-width", type=int, default=16)
    args = ap.parse_args()

    spec = DeskSpec(
        image_height=args.image_size,
        image_width=args.image_size,
        window_height=args.window_height,
        window_width=args.window_width,
        n_pos_train=args.n_pos,
        n_neg_train=args.n_neg,
        n_test=args.n_test,
        seed=args.seed,
    )
    write_desk_dataset(make_desk_dataset(spec), args.out)
    total = args.n_pos + args.n_neg + args.n_test
    print(f"wrote {total} images under {args.out} (seed {args.seed})")


if __name__ == "__main__":
    main()
