#!/usr/bin/env python3
"""Three-blob clustering fixture with reference labels from scikit-learn."""
import argparse
import os

import numpy as np
from sklearn.cluster import AffinityPropagation
from sklearn.datasets import make_blobs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "tests", "data", "blobs.csv"))
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    x, truth = make_blobs(n_samples=75, centers=[[0, 0], [6, 6], [-6, 6]], cluster_std=0.8,
                          random_state=args.seed)
    sim = -((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2)
    model = AffinityPropagation(affinity="precomputed", damping=0.5, max_iter=200,
                                convergence_iter=15, random_state=0).fit(sim)
    assert len(model.cluster_centers_indices_) == 3
    with open(args.out, "w") as f:
        f.write("x,y,blob,reference_label\n")
        for (a, b), t, l in zip(x, truth, model.labels_):
            f.write(f"{float(a)!r},{float(b)!r},{t},{l}\n")


if __name__ == "__main__":
    main()
