"""Cap and strip contours of (omega, Omega) for a comet orbit export.

Download the small-body query results (columns ``om`` and ``w`` in degrees)
from the JPL site and pass the CSV path; nothing is fetched here.
"""
import argparse
import sys

from manifold_quantiles import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/comets")
    args = ap.parse_args()
    return cli.main(["--out", args.out, "--seed", str(args.seed), "comets", "--csv", args.csv])


if __name__ == "__main__":
    sys.exit(main())
