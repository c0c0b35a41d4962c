#!/usr/bin/env python3
"""Generate a synthetic classification CSV for the dataset-bandit pipeline.

Features are Gaussian clusters, one per class, so learned policies can beat
the (k-1)/k uniform-random regret rate.

    python scripts/make_dataset_csv.py --rows 15000 --classes 4 --out data/clusters.csv
"""

import argparse
from pathlib import Path

import numpy as np


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=15_000)
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--dimension", type=int, default=10)
    parser.add_argument("--spread", type=float, default=0.6,
                        help="within-cluster noise relative to unit centers")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    return parser.parse_args()


def main():
    args = parse_args()
    rng = np.random.default_rng(args.seed)
    centers = rng.standard_normal((args.classes, args.dimension))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = rng.integers(args.classes, size=args.rows)
    features = centers[labels] + args.spread * rng.standard_normal(
        (args.rows, args.dimension))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(f"f{i}" for i in range(args.dimension)) + ",label\n")
        for row, label in zip(features, labels):
            fh.write(",".join(f"{v:.6f}" for v in row) + f",c{label}\n")
    print(f"wrote {args.rows} rows, {args.classes} classes -> {out}")


if __name__ == "__main__":
    main()
