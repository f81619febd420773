"""Cap-type contours for the unconditional presets T1-T3 and S1-S3.

Writes one directory per preset with ranks, contour polylines and a fit
summary. Defaults follow the large-sample setting n = 4001.
"""
import argparse

from manifold_quantiles import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--presets", default="T1,T2,T3,S1,S2,S3")
    ap.add_argument("--n-R", type=int, default=40)
    ap.add_argument("--n-S", type=int, default=100)
    ap.add_argument("--contours", default="0,5,10,20,28")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/caps")
    args = ap.parse_args()
    for name in args.presets.split(","):
        code = cli.main(["--out", f"{args.out}/{name}", "--seed", str(args.seed), "fit", "--preset", name,
                         "--region", "cap", "--n-R", str(args.n_R), "--n-S", str(args.n_S), "--n-0", "1",
                         "--contours", args.contours])
        print(f"{name}: exit {code}")


if __name__ == "__main__":
    main()
