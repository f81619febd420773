"""Conditional cap contours for the regression presets, k-NN (k = N) and
trimmed Gaussian weights (h = pi/10), n = 10^4 and N = 2001.

Queries default to one representative covariate per preset family.
"""
import argparse
import math

from manifold_quantiles import cli

QUERIES = {
    "TS1": ["0.6,0.6,0.529150262212918"],
    "TS2": ["0.6,0.6,0.529150262212918"],
    "SS1": ["0.6,0.8"],
    "SS2": ["0.6,0.8"],
    "TR1": ["1", "3", "5"],
    "SR": ["1", "3", "5"],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--presets", default="SS1,SS2,TS1,TS2,TR1,SR")
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--weights", choices=["knn", "kernel", "both"], default="both")
    ap.add_argument("--contours", default="0,5,12,16,20")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/conditional")
    args = ap.parse_args()
    kinds = ["knn", "kernel"] if args.weights == "both" else [args.weights]
    for name in args.presets.split(","):
        for kind in kinds:
            weight = ["--knn", "2001"] if kind == "knn" else ["--bandwidth", repr(math.pi / 10)]
            queries = [a for q in QUERIES[name] for a in ("--query", q)]
            code = cli.main(["--out", f"{args.out}/{name}_{kind}", "--seed", str(args.seed), "regress",
                             "--preset", name, "--n", str(args.n), *queries, *weight, "--N-R", "20",
                             "--N-S", "100", "--N-0", "1", "--contours", args.contours,
                             "--workers", str(args.workers)])
            print(f"{name} {kind}: exit {code}")


if __name__ == "__main__":
    main()
