"""Command-line entry point: ``manifold-quantiles <command> [options]``.

Commands emit data files (CSV or JSON) plus a ``manifest.json`` holding the
full run configuration. Nothing is plotted.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import run_checks
from .geometry import angles_to_points, as_spec, points_to_angles, wrap_angle
from .io import PointTable, dumps_json, read_points, write_manifest, write_points
from .presets import REGRESSION_PRESETS, get_preset, get_regression_model
from .quantiles import FrechetCap, GridError, center_rule, fit_quantiles, latitude_profile
from .regression import CovariateSpace, EmptyWindow, Kernel, Knn, fit_conditional

log = logging.getLogger("manifold_quantiles")

COMET_CONTOURS = (0, 10, 18, 26, 34)


class CommandError(RuntimeError):
    """A command could not run; reported with exit code 1."""


@dataclass
class RunConfig:
    command: str
    manifold: str | None = None
    seed: int = 0
    out: str = "out"
    format: str = "csv"
    preset: str | None = None
    input: str | None = None
    n: int | None = None
    n_R: int | None = None
    n_S: int | None = None
    n_0: int = 1
    region: str | None = None
    factor: int = 0
    grid_mode: str | None = None
    contours: list = field(default_factory=list)
    queries: list = field(default_factory=list)
    queries_file: str | None = None
    covariates: str | None = None
    knn: int | None = None
    bandwidth: float | None = None
    kernel: str = "trimmed_gaussian"
    workers: int = 1
    csv: str | None = None
    omega_col: str = "w"
    node_col: str = "om"
    name_col: str = "full_name"
    strip_n_0: int = 61
    strip_n_R: int = 40
    strip_n_S: int = 96
    p: int = 2
    taus: list = field(default_factory=list)

    def grid_size(self):
        if self.n_R is None or self.n_S is None:
            return None
        return self.n_0 + self.n_R * self.n_S

    def validate(self):
        if self.format not in ("csv", "json"):
            raise CommandError(f"unknown format {self.format!r}")
        size = self.grid_size()
        if self.command in ("sample", "fit") and self.n is not None and size is not None and self.n != size:
            raise CommandError(f"n={self.n} but n_0 + n_R n_S = {size}")
        if self.n_0 < 0 or (self.n_R is not None and self.n_R < 1) or (self.n_S is not None and self.n_S < 1):
            raise CommandError("grid sizes must be positive")
        return self


# -- helpers -------------------------------------------------------------------

def _ext(cfg):
    return "json" if cfg.format == "json" else "csv"


def _angle_columns(spec, pts):
    if not spec.is_torus or len(pts) == 0:
        return {}
    ang = points_to_angles(pts)
    return {f"angle_{j}": ang[:, j] for j in range(spec.k)}


def _rule_for(cfg, default="cap"):
    region = cfg.region or default
    try:
        return center_rule(region, cfg.factor)
    except ValueError as exc:
        raise CommandError(str(exc)) from None


def _preset(cfg):
    try:
        return get_preset(cfg.preset, cfg.manifold)
    except KeyError as exc:
        raise CommandError(exc.args[0]) from None


def _write_fit(cfg, out, fit, prefix, meta):
    """Ranks table, per-contour polylines and a JSON summary of one fit."""
    spec, ext, files = fit.spec, _ext(cfg), []
    extra = {"rank": fit.ranks, "grid_index": fit.perm}
    extra.update({f"sign_{c}": fit.signs[:, c] for c in range(spec.ambient_dim)})
    extra.update(_angle_columns(spec, fit.sample))
    files.append(write_points(out / f"{prefix}ranks.{ext}", PointTable(fit.sample, spec.name, meta, extra), cfg.format))
    contours = cfg.contours or sorted({0 if fit.grid.n_0 else 1, fit.n_R // 2, fit.n_R})
    for r in contours:
        idx = fit.contour_indices(r)
        pts = fit.sample[idx]
        cols = {"index": idx, "ring": fit.grid.ring[fit.perm[idx]], "rank": fit.ranks[idx]}
        cols.update(_angle_columns(spec, pts))
        m = dict(meta, r=int(r), level=r / (fit.n_R + 1))
        files.append(write_points(out / f"{prefix}contour_r{r}.{ext}", PointTable(pts, spec.name, m, cols), cfg.format))
    counts = np.bincount(fit.ranks, minlength=fit.n_R + 1)
    summary = {
        "manifold": spec.name,
        "n": int(fit.sample.shape[0]),
        "n_0": fit.grid.n_0,
        "n_R": fit.grid.n_R,
        "n_S": fit.grid.n_S,
        "grid_mode": fit.grid.mode.value,
        "center": fit.center.to_json(),
        "theta_hat": fit.theta_hat,
        "pole": fit.pole,
        "objective": fit.objective,
        "rank_counts": {str(r): int(c) for r, c in enumerate(counts)},
        "rank_counts_ok": bool(counts[0] == fit.grid.n_0 and np.all(counts[1:] == fit.grid.n_S)),
        "contours": [int(r) for r in contours],
    }
    path = out / f"{prefix}fit.json"
    path.write_text(dumps_json(dict(summary, fit=fit.to_json()) if cfg.format == "json" else summary))
    files.append(path)
    return files, summary


def _rank_report(summary):
    c = summary["rank_counts"]
    ring = {v for k, v in c.items() if k != "0"}
    return f"rank 0 x{c['0']}, ranks 1..{summary['n_R']} x{','.join(map(str, sorted(ring)))}"


# -- commands ------------------------------------------------------------------

def cmd_sample(cfg: RunConfig):
    if not cfg.preset:
        raise CommandError("sample needs --preset")
    n = cfg.n or cfg.grid_size()
    if not n:
        raise CommandError("sample needs --n")
    preset = _preset(cfg)
    y = preset.sample(n, cfg.seed)
    out = Path(cfg.out)
    meta = {"preset": preset.name, "seed": cfg.seed, "n": int(n)}
    path = write_points(out / f"sample.{_ext(cfg)}", PointTable(y, preset.spec.name, meta), cfg.format)
    return {"files": [path]}


def cmd_fit(cfg: RunConfig):
    if cfg.n_R is None or cfg.n_S is None:
        raise CommandError("fit needs --n-R and --n-S")
    if cfg.input:
        table = read_points(cfg.input)
        if cfg.manifold and as_spec(cfg.manifold) != table.spec:
            raise CommandError(f"--manifold {cfg.manifold} disagrees with {table.manifold} in {cfg.input}")
        y, spec, default_region, source = table.points, table.spec, "cap", str(cfg.input)
    elif cfg.preset:
        preset = _preset(cfg)
        y = preset.sample(cfg.grid_size(), cfg.seed)
        spec, default_region, source = preset.spec, preset.region, preset.name
        if cfg.factor == 0 and preset.factor:
            cfg.factor = preset.factor
    else:
        raise CommandError("fit needs --input or --preset")
    if y.shape[0] != cfg.grid_size():
        raise CommandError(f"{y.shape[0]} points but n_0 + n_R n_S = {cfg.grid_size()}")
    rule = _rule_for(cfg, default_region)
    fit = fit_quantiles(spec, y, rule, cfg.n_R, cfg.n_S, cfg.n_0, seed=cfg.seed, grid_mode=cfg.grid_mode)
    out = Path(cfg.out)
    meta = {"source": source, "seed": cfg.seed, "region": cfg.region or default_region}
    files, summary = _write_fit(cfg, out, fit, "", meta)
    print(_rank_report(summary))
    return {"files": files, "summary": summary}


def _parse_query(text, space):
    vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    return space.as_rows(np.array(vals))[0]


def _read_queries(path):
    """One query per non-empty line; commas separate coordinates, a header
    line of non-numbers is skipped."""
    out = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                vals = [v.strip() for v in row if v.strip()]
                if not vals:
                    continue
                try:
                    [float(v) for v in vals]
                except ValueError:
                    if out:
                        raise CommandError(f"{path}: bad query row {row}") from None
                    continue
                out.append(",".join(vals))
    except OSError as exc:
        raise CommandError(f"cannot read {path}: {exc}") from None
    return out


def _weight_fn(cfg, n):
    if cfg.knn is not None and cfg.bandwidth is not None:
        raise CommandError("choose either --knn or --bandwidth")
    if cfg.bandwidth is not None:
        return Kernel(cfg.bandwidth, cfg.kernel)
    return Knn(cfg.knn if cfg.knn is not None else n)


def _regress_one(task):
    """Worker body: one query of a sweep. Returns results, never raises
    on per-query problems."""
    (q, x, spec, space, cov, y, wfn, n_R, n_S, n_0, seed, rule, mode, contours) = task
    try:
        fit = fit_conditional(spec, space, cov, y, x, wfn, n_R, n_S, n_0, seed=seed,
                              center_rule=rule, grid_mode=mode, stream=q)
    except EmptyWindow as exc:
        return {"query": q, "status": "empty_window", "error": str(exc)}
    rs = contours or sorted({0 if n_0 else 1, n_R // 2, n_R})
    out = {
        "query": q,
        "status": "ok",
        "theta_hat": fit.theta_hat,
        "center": fit.center.to_json(),
        "support": int(np.count_nonzero(fit.weights)),
        "distinct_images": fit.distinct_images,
        "contours": {},
    }
    for r in rs:
        idx = fit.contour_indices(r)
        out["contours"][int(r)] = idx
    return out


def cmd_regress(cfg: RunConfig):
    if cfg.n_R is None or cfg.n_S is None:
        raise CommandError("regress needs --n-R and --n-S (the grid sizes N_R, N_S)")
    queries = list(cfg.queries) + (_read_queries(cfg.queries_file) if cfg.queries_file else [])
    if not queries:
        raise CommandError("regress needs --query or --queries-file")
    out = Path(cfg.out)
    files = []
    if cfg.input:
        table = read_points(cfg.input)
        xcols = sorted((k for k in table.extra if k.startswith("x_")), key=lambda k: int(k[2:]))
        if not xcols:
            raise CommandError(f"{cfg.input} has no covariate columns x_0, x_1, ...")
        cov = np.column_stack([table.extra[k] for k in xcols]).astype(float)
        space = CovariateSpace.parse(cfg.covariates) if cfg.covariates else CovariateSpace.euclidean(len(xcols))
        y, spec, default_region, source = table.points, table.spec, "cap", str(cfg.input)
    elif cfg.preset:
        try:
            model = get_regression_model(cfg.preset)
        except KeyError as exc:
            raise CommandError(exc.args[0]) from None
        if not cfg.n:
            raise CommandError("regress with a preset needs --n")
        cov, y = model.sample(cfg.n, cfg.seed)
        space, spec, default_region, source = model.covariates, model.spec, model.region, model.name
        meta = {"preset": model.name, "seed": cfg.seed, "covariates": space.name}
        xcols = {f"x_{c}": cov[:, c] for c in range(cov.shape[1])}
        files.append(write_points(out / f"data.{_ext(cfg)}", PointTable(y, spec.name, meta, xcols), cfg.format))
    else:
        raise CommandError("regress needs --input or --preset")
    if space.width != cov.shape[1]:
        raise CommandError(f"covariate space {space.name} needs {space.width} columns, data has {cov.shape[1]}")
    rule = _rule_for(cfg, default_region)
    wfn = _weight_fn(cfg, y.shape[0])
    xs = [_parse_query(q, space) for q in queries]
    tasks = [(q, x, spec, space, cov, y, wfn, cfg.n_R, cfg.n_S, cfg.n_0, cfg.seed, rule, cfg.grid_mode,
              list(cfg.contours)) for q, x in enumerate(xs)]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_regress_one, tasks))
    else:
        results = [_regress_one(t) for t in tasks]

    ext, report = _ext(cfg), []
    for res, x in zip(results, xs):
        q = res["query"]
        entry = {"query": q, "x": x, "status": res["status"]}
        if res["status"] != "ok":
            entry["error"] = res["error"]
            log.warning("query %d (x=%s): %s", q, x.tolist(), res["error"])
            report.append(entry)
            continue
        entry.update({k: res[k] for k in ("theta_hat", "center", "support", "distinct_images")})
        for r, idx in res["contours"].items():
            pts = y[idx]
            cols = {"index": idx}
            cols.update(_angle_columns(spec, pts))
            meta = {"source": source, "seed": cfg.seed, "query": q, "x": x, "r": r, "level": r / (cfg.n_R + 1),
                    "N_0": cfg.n_0, "N_R": cfg.n_R, "N_S": cfg.n_S, **wfn.describe()}
            files.append(write_points(out / f"contour_q{q}_r{r}.{ext}", PointTable(pts, spec.name, meta, cols), cfg.format))
        entry["contours"] = sorted(res["contours"])
        report.append(entry)
    path = out / "queries.json"
    path.write_text(dumps_json(report))
    files.append(path)
    bad = sum(e["status"] != "ok" for e in report)
    print(f"{len(report) - bad} of {len(report)} queries fitted")
    return {"files": files, "queries": report}


def read_comets(path, omega_col="w", node_col="om", name_col="full_name"):
    """(designations, angles) with angles (omega, Omega) in [-pi, pi).

    Rows whose angles are missing or unparsable are dropped and counted.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            fields = reader.fieldnames or []
            for col in (omega_col, node_col):
                if col not in fields:
                    raise CommandError(f"{path}: no column {col!r} (have {', '.join(fields)})")
            names, rows, dropped = [], [], 0
            for i, rec in enumerate(reader):
                try:
                    w, om = float(rec[omega_col]), float(rec[node_col])
                except (TypeError, ValueError):
                    dropped += 1
                    continue
                if not (math.isfinite(w) and math.isfinite(om)):
                    dropped += 1
                    continue
                names.append((rec.get(name_col) or f"row{i}").strip())
                rows.append((w, om))
    except (OSError, csv.Error, UnicodeDecodeError) as exc:
        raise CommandError(f"cannot read {path}: {exc}") from None
    ang = wrap_angle(np.radians(np.array(rows, dtype=float).reshape(-1, 2)))
    return names, ang, dropped


def cmd_comets(cfg: RunConfig):
    if not cfg.csv:
        raise CommandError("comets needs --csv")
    names, ang, dropped = read_comets(cfg.csv, cfg.omega_col, cfg.node_col, cfg.name_col)
    n_R = cfg.n_R if cfg.n_R is not None else 39
    n_S = cfg.n_S if cfg.n_S is not None else 100
    fits = {"cap": (cfg.n_0, n_R, n_S, FrechetCap()),
            "strip": (cfg.strip_n_0, cfg.strip_n_R, cfg.strip_n_S, center_rule("strip", 0))}
    need = max(a + b * c for a, b, c, _ in fits.values())
    if ang.shape[0] < need:
        raise CommandError(f"{ang.shape[0]} usable rows, need {need}")
    out, files, summaries = Path(cfg.out), [], {}
    contours = cfg.contours or list(COMET_CONTOURS)
    for kind, (n_0, nr, ns, rule) in fits.items():
        m = n_0 + nr * ns
        y = angles_to_points(ang[:m])
        fit = fit_quantiles("t2", y, rule, nr, ns, n_0, seed=cfg.seed, grid_mode=cfg.grid_mode)
        sub = RunConfig(**{**asdict(cfg), "contours": [r for r in contours if r <= nr]})
        meta = {"source": str(cfg.csv), "seed": cfg.seed, "region": kind, "rows_used": m}
        f, summary = _write_fit(sub, out, fit, f"{kind}_", meta)
        summary["rows_used"] = m
        summary["first_rows"] = names[:3]
        files += f
        summaries[kind] = summary
        print(f"{kind}: {m} rows; {_rank_report(summary)}")
    print(f"dropped {dropped} rows with missing angles")
    return {"files": files, "dropped": dropped, "usable": int(ang.shape[0]), "fits": summaries}


def cmd_check(cfg: RunConfig):
    checks = run_checks(cfg.seed)
    report = {"passed": all(c.passed for c in checks), "checks": [c.to_json() for c in checks]}
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "check.json"
    path.write_text(dumps_json(report))
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.measured:.3g} (tol {c.tolerance:g}) {c.detail}")
    return {"files": [path], "report": report}


def cmd_s_tau(cfg: RunConfig):
    taus = cfg.taus or [t / 100 for t in range(1, 100)]
    rows = [(cfg.p, t, latitude_profile(cfg.p, t)) for t in taus]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.format == "json":
        path = out / "s_tau.json"
        path.write_text(dumps_json({"p": cfg.p, "tau": [r[1] for r in rows], "s": [r[2] for r in rows]}))
    else:
        path = out / "s_tau.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["p", "tau", "s"])
            w.writerows([(p, repr(float(t)), repr(s)) for p, t, s in rows])
    for _, t, s in rows[:: max(1, len(rows) // 10)]:
        print(f"s({t:g}) = {s:.15f}")
    return {"files": [path]}


COMMANDS = {
    "sample": cmd_sample,
    "fit": cmd_fit,
    "regress": cmd_regress,
    "comets": cmd_comets,
    "check": cmd_check,
    "s-tau": cmd_s_tau,
}


# -- argument parsing ----------------------------------------------------------

def _ints(text):
    return [int(v) for v in text.split(",") if v.strip()]


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _global_flags(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--manifold", default=d(None), help="e.g. s2, t2, s1xs2")
    p.add_argument("--seed", type=int, default=d(0))
    p.add_argument("--out", default=d("out"), help="output directory")
    p.add_argument("--format", choices=["csv", "json"], default=d("csv"))


def _grid_flags(p, big=False):
    for name, default in (("R", None), ("S", None), ("0", 1)):
        opts = [f"--n-{name}"] + ([f"--N-{name}"] if big else [])
        p.add_argument(*opts, dest=f"n_{name}", type=int, default=default)
    p.add_argument("--grid-mode", choices=["iid", "equispaced", "fibered"])
    p.add_argument("--contours", type=_ints, default=[], help="comma-separated r values")


def build_parser():
    parser = argparse.ArgumentParser(prog="manifold-quantiles", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="draw a sample from a preset")
    _global_flags(p, True)
    p.add_argument("--preset", required=True, help="T1..T3, S1..S3, Ta..Tc, Sa..Sc or uniform")
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("fit", help="empirical quantile contours, ranks and signs")
    _global_flags(p, True)
    p.add_argument("--input", help="sample file written by 'sample' (or same layout)")
    p.add_argument("--preset")
    p.add_argument("--n", type=int)
    p.add_argument("--region", choices=["cap", "strip", "factor-cap"])
    p.add_argument("--factor", type=int, default=0)
    _grid_flags(p)

    p = sub.add_parser("regress", help="conditional quantile contours at query covariates")
    _global_flags(p, True)
    p.add_argument("--input", help="data file with x_0, x_1, ... covariate columns")
    p.add_argument("--preset", help=", ".join(REGRESSION_PRESETS))
    p.add_argument("--n", type=int)
    p.add_argument("--covariates", help="covariate space for --input data: r<d> or a manifold")
    p.add_argument("--query", dest="queries", action="append", default=[], help="e.g. 0.6,0.8 (repeatable)")
    p.add_argument("--queries-file", help="CSV with one query per row")
    p.add_argument("--knn", type=int)
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--kernel", choices=["trimmed_gaussian", "box"], default="trimmed_gaussian")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--region", choices=["cap", "strip", "factor-cap"])
    p.add_argument("--factor", type=int, default=0)
    _grid_flags(p, big=True)

    p = sub.add_parser("comets", help="cap and strip contours of (omega, Omega) on the torus")
    _global_flags(p, True)
    p.add_argument("--csv", required=True)
    p.add_argument("--omega-col", default="w")
    p.add_argument("--node-col", default="om")
    p.add_argument("--name-col", default="full_name")
    p.add_argument("--n-0", dest="n_0", type=int, default=1)
    p.add_argument("--n-R", dest="n_R", type=int, default=39)
    p.add_argument("--n-S", dest="n_S", type=int, default=100)
    p.add_argument("--strip-n-0", type=int, default=61)
    p.add_argument("--strip-n-R", type=int, default=40)
    p.add_argument("--strip-n-S", type=int, default=96)
    p.add_argument("--grid-mode", choices=["iid", "equispaced", "fibered"])
    p.add_argument("--contours", type=_ints, default=list(COMET_CONTOURS))

    p = sub.add_parser("check", help="run the built-in self-checks")
    _global_flags(p, True)

    p = sub.add_parser("s-tau", help="tabulate the latitude profile s(tau)")
    _global_flags(p, True)
    p.add_argument("--p", type=int, default=2)
    p.add_argument("--tau", dest="taus", type=_floats, default=[])
    return parser


def config_from_args(ns) -> RunConfig:
    known = set(RunConfig.__dataclass_fields__)
    return RunConfig(**{k: v for k, v in vars(ns).items() if k in known}).validate()


def run(cfg: RunConfig):
    """Run one command and write its manifest; returns the command result."""
    result = COMMANDS[cfg.command](cfg)
    extra = {k: result[k] for k in ("summary", "fits", "dropped", "usable") if k in result}
    if "queries" in result:
        extra["queries"] = [{k: e[k] for k in ("query", "x", "status")} for e in result["queries"]]
    result["manifest"] = write_manifest(cfg.out, asdict(cfg), result["files"], extra)
    return result


def main(argv=None):
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run(config_from_args(ns))
    except (CommandError, GridError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
