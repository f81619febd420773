"""Plain-text interchange for points, ranks and contours.

CSV files start with ``# key: value`` comment lines carrying metadata,
followed by a header row. Point coordinates are written as ``f{j}_{c}``
(factor ``j``, coordinate ``c``); any other column is an extra field.
JSON files hold the same content with per-factor nested point arrays.
Floats are written with ``repr`` so every file reads back bit for bit.
"""
from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from .geometry import as_spec

COORD = re.compile(r"f(\d+)_(\d+)")


class FormatError(ValueError):
    """A data file could not be parsed."""


@dataclass
class PointTable:
    points: np.ndarray
    manifold: str
    meta: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)  # column name -> 1-d array

    @property
    def spec(self):
        return as_spec(self.manifold)


def coord_names(spec):
    spec = as_spec(spec)
    return [f"f{j}_{c}" for j, p in enumerate(spec.factors) for c in range(p + 1)]


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def dumps_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_points(path, table: PointTable, fmt=None):
    """Write a point table as CSV or JSON (chosen from ``fmt`` or the suffix)."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    spec = table.spec
    pts = np.atleast_2d(spec.check(table.points)) if len(table.points) else np.empty((0, spec.ambient_dim))
    extra = {k: np.asarray(v) for k, v in table.extra.items()}
    for k, v in extra.items():
        if v.shape[0] != pts.shape[0]:
            raise ValueError(f"column {k!r} has {v.shape[0]} rows, expected {pts.shape[0]}")
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        doc = {
            "manifold": spec.name,
            "meta": table.meta,
            "points": [[row[s].tolist() for s in spec.slices] for row in pts],
            "columns": {k: v.tolist() for k, v in extra.items()},
        }
        path.write_text(dumps_json(doc))
        return path
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    with path.open("w", newline="") as fh:
        fh.write(f"# manifold: {spec.name}\n")
        for k, v in table.meta.items():
            fh.write(f"# {k}: {json.dumps(_jsonable(v))}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(coord_names(spec) + list(extra))
        cols = [extra[k] for k in extra]
        for i, row in enumerate(pts):
            w.writerow([_fmt(x) for x in row] + [_fmt(c[i]) for c in cols])
    return path


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _column(values):
    try:
        ints = [int(v) for v in values]
        if all(str(i) == v for i, v in zip(ints, values)):
            return np.array(ints, dtype=np.int64)
    except ValueError:
        pass
    return np.array([float(v) for v in values])


def read_points(path) -> PointTable:
    """Inverse of :func:`write_points`."""
    path = Path(path)
    try:
        if path.suffix == ".json":
            doc = json.loads(path.read_text())
            spec = as_spec(doc["manifold"])
            pts = np.array([np.concatenate(row) for row in doc["points"]], dtype=float).reshape(-1, spec.ambient_dim)
            extra = {k: np.asarray(v) for k, v in doc.get("columns", {}).items()}
            return PointTable(pts, spec.name, doc.get("meta", {}), extra)
        meta, body = {}, []
        for line in path.read_text().splitlines():
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                meta[key.strip()] = _parse_value(val.strip())
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise FormatError(f"{path} has no header row")
    manifold = meta.pop("manifold", None)
    if manifold is None:
        raise FormatError(f"{path} lacks a '# manifold:' line")
    spec = as_spec(str(manifold))
    header, data = rows[0], rows[1:]
    names = coord_names(spec)
    if header[: len(names)] != names:
        raise FormatError(f"{path}: expected coordinate columns {names}")
    if any(len(r) != len(header) for r in data):
        raise FormatError(f"{path}: ragged rows")
    try:
        pts = np.array([[float(x) for x in r[: len(names)]] for r in data]).reshape(-1, len(names))
        extra = {h: _column([r[i] for r in data]) for i, h in enumerate(header) if i >= len(names)}
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    return PointTable(pts, spec.name, meta, extra)


def library_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(out_dir, config: dict, files, extra=None):
    """Record the full run config, the version and the emitted files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "version": library_version(),
        "config": config,
        "files": sorted(str(Path(f).relative_to(out_dir)) if Path(f).is_relative_to(out_dir) else str(f) for f in files),
    }
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(dumps_json(doc))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
