"""Strip-type contours for the presets Ta-Tc and Sa-Sc (n_0=41, n_R=20, n_S=198)."""
import argparse

from manifold_quantiles import cli


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--presets", default="Ta,Tb,Tc,Sa,Sb,Sc")
    ap.add_argument("--n-0", type=int, default=41)
    ap.add_argument("--n-R", type=int, default=20)
    ap.add_argument("--n-S", type=int, default=198)
    ap.add_argument("--contours", default="0,5,9,12,16")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="results/strips")
    args = ap.parse_args()
    for name in args.presets.split(","):
        code = cli.main(["--out", f"{args.out}/{name}", "--seed", str(args.seed), "fit", "--preset", name,
                         "--region", "strip", "--n-0", str(args.n_0), "--n-R", str(args.n_R),
                         "--n-S", str(args.n_S), "--contours", args.contours])
        print(f"{name}: exit {code}")


if __name__ == "__main__":
    main()
