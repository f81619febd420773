"""Geometry of products of unit spheres.

Points are stored extrinsically: a point of S^{p_1} x ... x S^{p_k} is a flat
array of length sum(p_i + 1) holding the per-factor unit vectors one after the
other. Tangent vectors use the same layout. All functions broadcast over
leading axes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

import numpy as np

CUT_LOCUS_TOL = 1e-12


class GeometryError(ValueError):
    pass


class DimensionMismatch(GeometryError):
    pass


class CutLocusError(GeometryError):
    """Raised when a log map is requested for a point on the cut locus."""


@dataclass(frozen=True)
class ManifoldSpec:
    """Ordered sphere dimensions of a polysphere.

    ``ManifoldSpec((2,))`` is S^2, ``ManifoldSpec((1, 1))`` the 2-torus.
    """

    factors: tuple[int, ...]

    def __post_init__(self):
        factors = tuple(int(p) for p in self.factors)
        if not factors or any(p < 1 for p in factors):
            raise GeometryError(f"invalid sphere factors {self.factors!r}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def parse(cls, text: str) -> "ManifoldSpec":
        """Parse ``"s2"``, ``"t3"``, ``"s1xs2"`` and similar."""
        factors: list[int] = []
        for part in text.strip().lower().split("x"):
            m = re.fullmatch(r"([st])(\d+)", part)
            if m is None:
                raise GeometryError(f"cannot parse manifold {text!r}")
            kind, p = m.group(1), int(m.group(2))
            if p < 1:
                raise GeometryError(f"cannot parse manifold {text!r}")
            factors.extend([1] * p if kind == "t" else [p])
        return cls(tuple(factors))

    @property
    def name(self) -> str:
        if self.is_torus and self.k > 1:
            return f"t{self.k}"
        return "x".join(f"s{p}" for p in self.factors)

    def __str__(self):
        return self.name

    @property
    def k(self) -> int:
        return len(self.factors)

    @property
    def dim(self) -> int:
        return sum(self.factors)

    @property
    def ambient_dim(self) -> int:
        return sum(p + 1 for p in self.factors)

    @property
    def is_torus(self) -> bool:
        return all(p == 1 for p in self.factors)

    @cached_property
    def slices(self) -> tuple[slice, ...]:
        out, start = [], 0
        for p in self.factors:
            out.append(slice(start, start + p + 1))
            start += p + 1
        return tuple(out)

    def split(self, y):
        y = np.asarray(y, dtype=float)
        return [y[..., s] for s in self.slices]

    def check(self, y, name="point"):
        y = np.asarray(y, dtype=float)
        if y.shape[-1:] != (self.ambient_dim,):
            raise DimensionMismatch(
                f"{name} has trailing dimension {y.shape[-1:]}, expected "
                f"{self.ambient_dim} for {self.name}"
            )
        return y

    def is_point(self, y, tol=1e-12) -> bool:
        y = self.check(y)
        return all(
            np.all(np.abs(np.linalg.norm(f, axis=-1) - 1.0) <= tol) for f in self.split(y)
        )

    def is_tangent(self, y, v, tol=1e-10) -> bool:
        y, v = self.check(y), self.check(v, "tangent")
        return all(
            np.all(np.abs(np.sum(a * b, axis=-1)) <= tol)
            for a, b in zip(self.split(y), self.split(v))
        )


def as_spec(spec) -> ManifoldSpec:
    if isinstance(spec, ManifoldSpec):
        return spec
    if isinstance(spec, str):
        return ManifoldSpec.parse(spec)
    return ManifoldSpec(tuple(spec))


def normalize(spec, y):
    """Project every factor onto its unit sphere."""
    spec = as_spec(spec)
    y = spec.check(y).copy()
    for s in spec.slices:
        y[..., s] /= np.linalg.norm(y[..., s], axis=-1, keepdims=True)
    return y


def project_tangent(spec, y, v):
    spec = as_spec(spec)
    y, v = spec.check(y), spec.check(v, "tangent").copy()
    for s in spec.slices:
        v[..., s] -= np.sum(v[..., s] * y[..., s], axis=-1, keepdims=True) * y[..., s]
    return v


def _factor_angle(a, b):
    # atan2 form stays accurate for nearly equal and nearly antipodal points
    dot = np.sum(a * b, axis=-1)
    perp = b - dot[..., None] * a
    return np.arctan2(np.linalg.norm(perp, axis=-1), dot)


def factor_distances(spec, y, z):
    """Per-factor great-circle distances, shape ``(..., k)``."""
    spec = as_spec(spec)
    y, z = spec.check(y), spec.check(z)
    return np.stack([_factor_angle(y[..., s], z[..., s]) for s in spec.slices], axis=-1)


def geodesic_distance(spec, y, z):
    """Product geodesic distance, the l2 norm of the per-factor arc lengths."""
    return np.sqrt(np.sum(factor_distances(spec, y, z) ** 2, axis=-1))


def norm(spec, v):
    """Riemannian norm of a tangent vector (plain l2 in the embedding)."""
    v = as_spec(spec).check(v, "tangent")
    return np.linalg.norm(v, axis=-1)


def exp_map(spec, y, v):
    spec = as_spec(spec)
    y, v = spec.check(y), spec.check(v, "tangent")
    y, v = np.broadcast_arrays(y, v)
    out = np.empty(y.shape)
    for s in spec.slices:
        ys, vs = y[..., s], v[..., s]
        t = np.linalg.norm(vs, axis=-1, keepdims=True)
        safe = np.where(t > 0, t, 1.0)
        res = np.cos(t) * ys + np.sin(t) * vs / safe
        res = np.where(t > 0, res, ys)
        out[..., s] = res / np.linalg.norm(res, axis=-1, keepdims=True)
    return out


def log_map(spec, y, z):
    """Inverse of :func:`exp_map` away from the cut locus of ``y``."""
    spec = as_spec(spec)
    y, z = spec.check(y), spec.check(z)
    y, z = np.broadcast_arrays(y, z)
    out = np.empty(y.shape)
    for s in spec.slices:
        ys, zs = y[..., s], z[..., s]
        dot = np.sum(ys * zs, axis=-1)
        if np.any(dot < -1.0 + CUT_LOCUS_TOL):
            raise CutLocusError("log map requested at a cut-locus point")
        perp = zs - dot[..., None] * ys
        pn = np.linalg.norm(perp, axis=-1, keepdims=True)
        theta = np.arctan2(pn, dot[..., None])
        out[..., s] = np.where(pn > 0, perp * theta / np.where(pn > 0, pn, 1.0), 0.0)
    return out


def cut_locus_distance(spec, y, z):
    """Distance from ``z`` to Cut(y): min over factors of pi - d_i(y_i, z_i)."""
    return np.min(np.pi - factor_distances(spec, y, z), axis=-1)


def uniform_sample(spec, n, seed=None):
    """n i.i.d. uniform points (normalized Gaussians per factor)."""
    spec = as_spec(spec)
    rng = np.random.default_rng(seed)
    return normalize(spec, rng.standard_normal((int(n), spec.ambient_dim)))


def pairwise_distances(spec, a, b, squared=False):
    """Geodesic distances between the rows of ``a`` and ``b``.

    Uses clamped arccos of per-factor Gram matrices, which is what the
    transport cost needs at scale.
    """
    spec = as_spec(spec)
    a, b = np.atleast_2d(spec.check(a)), np.atleast_2d(spec.check(b))
    sq = np.zeros((a.shape[0], b.shape[0]))
    for s in spec.slices:
        g = np.clip(a[:, s] @ b[:, s].T, -1.0, 1.0)
        sq += np.arccos(g) ** 2
    return sq if squared else np.sqrt(sq)


def pairwise_distances_exact(spec, a, b, chunk_elems=4_000_000):
    """Like :func:`pairwise_distances` but accurate to rounding near 0.

    Per factor the angle is 2 atan2(|a - b|, |a + b|), evaluated in row
    chunks to bound memory.
    """
    spec = as_spec(spec)
    a, b = np.atleast_2d(spec.check(a)), np.atleast_2d(spec.check(b))
    out = np.empty((a.shape[0], b.shape[0]))
    step = max(1, chunk_elems // max(1, b.shape[0] * spec.ambient_dim))
    for lo in range(0, a.shape[0], step):
        blk = a[lo:lo + step, None, :]
        sq = np.zeros((blk.shape[0], b.shape[0]))
        for s in spec.slices:
            diff = np.linalg.norm(blk[..., s] - b[None, :, s], axis=-1)
            summ = np.linalg.norm(blk[..., s] + b[None, :, s], axis=-1)
            sq += (2.0 * np.arctan2(diff, summ)) ** 2
        out[lo:lo + step] = np.sqrt(sq)
    return out


# -- circle-factor angle codec -------------------------------------------------

def wrap_angle(phi):
    """Wrap angles to [-pi, pi)."""
    return (np.asarray(phi, dtype=float) + np.pi) % (2 * np.pi) - np.pi


def angles_to_points(angles):
    """(..., k) angles -> (..., 2k) points of the k-torus."""
    angles = np.asarray(angles, dtype=float)
    out = np.empty(angles.shape[:-1] + (2 * angles.shape[-1],))
    out[..., 0::2] = np.cos(angles)
    out[..., 1::2] = np.sin(angles)
    return out


def points_to_angles(y):
    """Inverse of :func:`angles_to_points`, angles in [-pi, pi)."""
    y = np.asarray(y, dtype=float)
    return wrap_angle(np.arctan2(y[..., 1::2], y[..., 0::2]))


def circle_tangent(angle):
    """Unit tangent of S^1 at ``angle`` in the positive orientation."""
    angle = np.asarray(angle, dtype=float)
    return np.stack([-np.sin(angle), np.cos(angle)], axis=-1)


def tangent_frame(x):
    """Orthonormal basis (columns) of the tangent space of S^p at unit ``x``.

    Deterministic: the Householder reflection taking e_{p+1} to ``x`` maps
    e_1..e_p onto the frame.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[0]
    e = np.zeros(m)
    e[-1] = 1.0
    u = e - x
    nu = np.dot(u, u)
    if nu < 1e-30:
        h = np.eye(m)
    else:
        h = np.eye(m) - 2.0 * np.outer(u, u) / nu
    return h[:, : m - 1]
