"""Largest displacement max_i d(F*(Y_i), Y_i) for uniform samples on S^2.

The population map is the identity here, so the displacement should shrink
as n grows.
"""
import argparse

import numpy as np

from manifold_quantiles import FrechetCap, fit_quantiles, geodesic_distance, uniform_sample

SIZES = {121: (3, 40), 1009: (18, 56), 4001: (40, 100)}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    for n, (n_R, n_S) in SIZES.items():
        errs = []
        for s in range(args.seeds):
            y = uniform_sample("s2", n, 10_000 + s)
            fit = fit_quantiles("s2", y, FrechetCap(), n_R, n_S, 1, seed=s)
            errs.append(geodesic_distance("s2", fit.images, y).max())
        print(f"n={n}: median {np.median(errs):.4f}, range [{min(errs):.4f}, {max(errs):.4f}]")


if __name__ == "__main__":
    main()
