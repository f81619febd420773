"""Empirical distribution and quantile functions, ranks, signs and contours.

A fit runs in two steps:

1. transport the sample to an i.i.d. uniform grid, locate the image of the
   sample point closest to the Fréchet mean and use it as pole;
2. build a structured grid (center copies plus ``n_R`` rings of ``n_S``
   points) around the center submanifold defined by that pole and
   transport the sample to it. Ranks are ring indices of the images, signs
   are the unit normal directions that generated them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.special import betainc

from .geometry import (
    GeometryError,
    ManifoldSpec,
    angles_to_points,
    as_spec,
    circle_tangent,
    exp_map,
    geodesic_distance,
    pairwise_distances,
    pairwise_distances_exact,
    points_to_angles,
    tangent_frame,
    uniform_sample,
    wrap_angle,
)
from .transport import cost_matrix, solve_assignment


class GridError(ValueError):
    pass


class DuplicatePoints(ValueError):
    pass


class ContourRangeError(IndexError):
    pass


# -- latitude profile ----------------------------------------------------------

def _simpson(f, a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, tol=1e-14, max_depth=50):
    """Adaptive Simpson quadrature with Richardson correction."""
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = _simpson(f, a, b, fa, fm, fb)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    total = 0.0
    while stack:
        a, b, fa, fm, fb, whole, eps, depth = stack.pop()
        m = 0.5 * (a + b)
        lm, rm = f(0.5 * (a + m)), f(0.5 * (m + b))
        left = _simpson(f, a, m, fa, lm, fm)
        right = _simpson(f, m, b, fm, rm, fb)
        delta = left + right - whole
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((a, m, fa, lm, fm, left, eps / 2, depth + 1))
            stack.append((m, b, fm, rm, fb, right, eps / 2, depth + 1))
    return total


@lru_cache(maxsize=None)
def _sphere_mass(p):
    return adaptive_simpson(lambda t: math.sin(math.pi * t) ** (p - 1), 0.0, 1.0)


def cap_content(p, s):
    """Uniform mass of a cap of radius pi*s on S^p, by quadrature."""
    if p == 1:
        return float(s)
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    # integrate from the nearer end so the integrand is smooth on short ranges
    if s <= 0.5:
        part = adaptive_simpson(lambda t: math.sin(math.pi * t) ** (p - 1), 0.0, s)
        return part / _sphere_mass(p)
    part = adaptive_simpson(lambda t: math.sin(math.pi * t) ** (p - 1), s, 1.0)
    return 1.0 - part / _sphere_mass(p)


@lru_cache(maxsize=4096)
def latitude_profile(p: int, tau: float) -> float:
    """Solve cap_content(p, s) = tau for s in [0, 1] by bisection."""
    tau = float(tau)
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau={tau} outside [0, 1]")
    if p < 1:
        raise ValueError("sphere dimension must be >= 1")
    if p == 1 or tau in (0.0, 1.0):
        return tau
    if tau == 0.5:
        return 0.5
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if cap_content(p, mid) < tau:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def cap_content_closed(p, dist):
    """Uniform mass of the geodesic ball of radius ``dist`` on S^p (incomplete beta)."""
    x = np.sin(np.asarray(dist, dtype=float) / 2.0) ** 2
    return betainc(p / 2.0, p / 2.0, np.clip(x, 0.0, 1.0))


# -- Fréchet mean --------------------------------------------------------------

def _safe_log(spec, y, z):
    """log_y(z) with zero contribution from antipodal factors."""
    out = np.empty(np.broadcast_shapes(np.shape(y), np.shape(z)))
    y, z = np.broadcast_arrays(y, z)
    for s in spec.slices:
        ys, zs = y[..., s], z[..., s]
        dot = np.sum(ys * zs, axis=-1, keepdims=True)
        perp = zs - dot * ys
        pn = np.linalg.norm(perp, axis=-1, keepdims=True)
        theta = np.arctan2(pn, dot)
        ok = pn > 1e-300
        out[..., s] = np.where(ok, perp * (theta / np.where(ok, pn, 1.0)), 0.0)
    return out


def frechet_objective(spec, points, weights, y):
    d = geodesic_distance(spec, points, y)
    return 0.5 * float(np.sum(weights * d**2))


def frechet_mean(spec, points, weights=None, max_iter=200, grad_tol=1e-9, chunk=512):
    """Weighted empirical Fréchet mean (a local minimiser of sum w d^2/2).

    Every sample point with positive weight is a starting candidate; the best
    one is refined by Riemannian gradient descent with Armijo backtracking.
    """
    spec = as_spec(spec)
    pts = np.atleast_2d(spec.check(points))
    if pts.shape[0] == 0:
        raise ValueError("Fréchet mean of an empty sample")
    w = np.full(pts.shape[0], 1.0 / pts.shape[0]) if weights is None else np.asarray(weights, float)
    if w.shape != (pts.shape[0],) or np.any(w < 0):
        raise ValueError("weights must be nonnegative, one per point")
    if w.sum() <= 0:
        raise ValueError("all weights are zero")
    w = w / w.sum()
    sup = np.flatnonzero(w > 0)
    ps, ws = pts[sup], w[sup]

    scores = np.empty(sup.size)
    for lo in range(0, sup.size, chunk):
        sq = pairwise_distances(spec, ps[lo:lo + chunk], ps, squared=True)
        scores[lo:lo + chunk] = 0.5 * sq @ ws
    top = np.argsort(scores, kind="stable")[:5]
    exact = [frechet_objective(spec, ps, ws, ps[i]) for i in top]
    y = ps[top[int(np.argmin(exact))]].copy()
    f = min(exact)

    for _ in range(max_iter):
        step = np.sum(ws[:, None] * _safe_log(spec, y, ps), axis=0)  # minus the gradient
        g2 = float(step @ step)
        if math.sqrt(g2) < grad_tol:
            break
        t = 1.0
        while t > 1e-12:
            cand = exp_map(spec, y, t * step)
            fc = frechet_objective(spec, ps, ws, cand)
            if fc <= f - 1e-4 * t * g2:
                break
            t *= 0.5
        else:
            break
        y, f = cand, fc
    return y


# -- centers -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Cap:
    """Single-point center. Spherical caps on S^p, hypercube caps on T^p.

    ``frame`` optionally fixes the tangent basis at the pole used to place
    ring points (S^p only); it defaults to :func:`tangent_frame`.
    """

    pole: np.ndarray
    frame: np.ndarray | None = None

    def to_json(self):
        return {"kind": "cap", "pole": np.asarray(self.pole).tolist()}


@dataclass(frozen=True, eq=False)
class FactorCap:
    """Caps in one sphere factor times the remaining factors."""

    factor: int
    point: np.ndarray
    frame: np.ndarray | None = None

    def to_json(self):
        return {"kind": "factor_cap", "factor": self.factor, "point": np.asarray(self.point).tolist()}


@dataclass(frozen=True, eq=False)
class Strip:
    """Equatorial strips in factor ``factor`` (dimension >= 2), around the
    equator relative to that factor of ``point``."""

    factor: int
    point: np.ndarray
    frame: np.ndarray | None = None

    def to_json(self):
        return {"kind": "strip", "factor": self.factor, "point": np.asarray(self.point).tolist()}


@dataclass(frozen=True)
class TorusEquator:
    """Strips [t - pi tau, t + pi tau] in circle component ``component``."""

    component: int
    angle: float

    def to_json(self):
        return {"kind": "torus_equator", "component": self.component, "angle": float(self.angle)}


CenterSpec = Cap | FactorCap | Strip | TorusEquator


def center_from_json(d):
    kind = d["kind"]
    if kind == "cap":
        return Cap(np.asarray(d["pole"], float))
    if kind == "factor_cap":
        return FactorCap(int(d["factor"]), np.asarray(d["point"], float))
    if kind == "strip":
        return Strip(int(d["factor"]), np.asarray(d["point"], float))
    if kind == "torus_equator":
        return TorusEquator(int(d["component"]), float(d["angle"]))
    raise ValueError(f"unknown center kind {kind!r}")


class GridMode(str, Enum):
    IID = "iid"
    EQUISPACED = "equispaced"
    FIBERED = "fibered"


def _halves(n):
    if n % 2:
        raise GridError(f"two-sided contours need an even n_S, got {n}")
    return np.repeat([1.0, -1.0], n // 2)


def _equispaced_angles(n, rng):
    return rng.uniform(0.0, 2 * np.pi) + 2 * np.pi * np.arange(n) / n


def _unit_rows(n, m, rng):
    g = rng.standard_normal((n, m))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


class _Layout:
    """Geometry of the uniform contours around one center."""

    singleton = False
    sided = False

    def __init__(self, spec: ManifoldSpec):
        self.spec = spec
        self.contour_dim = spec.dim - 1

    def center_point(self):
        raise NotImplementedError

    def fibers(self, n, rng, equi, sided):
        raise NotImplementedError

    def place(self, fib, tau):
        raise NotImplementedError

    def level(self, y):
        raise NotImplementedError


class _SphereCap(_Layout):
    singleton = True

    def __init__(self, spec, pole, frame):
        super().__init__(spec)
        self.p = spec.factors[0]
        self.pole = pole
        self.frame = tangent_frame(pole) if frame is None else np.asarray(frame, float)

    def center_point(self):
        return self.pole

    def fibers(self, n, rng, equi, sided):
        if equi:
            a = _equispaced_angles(n, rng)
            return {"g": np.stack([np.cos(a), np.sin(a)], axis=1)}
        return {"g": _unit_rows(n, self.p, rng)}

    def place(self, fib, tau):
        rho = np.pi * latitude_profile(self.p, tau)
        u = fib["g"] @ self.frame.T
        pts = np.cos(rho) * self.pole + np.sin(rho) * u
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        base = np.broadcast_to(self.pole, pts.shape).copy()
        return pts, base, u, np.full(len(pts), rho)

    def level(self, y):
        return cap_content_closed(self.p, geodesic_distance(self.spec, self.pole, y))


class _TorusCap(_Layout):
    singleton = True

    def __init__(self, spec, pole):
        super().__init__(spec)
        self.p = spec.k
        self.pole = pole
        self.t = points_to_angles(pole)
        self.sided = self.p == 1

    def center_point(self):
        return self.pole

    def fibers(self, n, rng, equi, sided):
        p = self.p
        if p == 1:
            return {"v": (_halves(n) if sided else np.ones(n))[:, None]}
        if equi:
            # equispaced by arc length along the square, counter-clockwise
            ell = (rng.uniform() + np.arange(n)) * 8.0 / n
            side, frac = np.floor(ell / 2.0).astype(int) % 4, np.mod(ell, 2.0) / 2.0
            corners = np.array([[1.0, -1.0], [1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0]])
            step = np.roll(corners, -1, axis=0) - corners
            return {"v": corners[side] + frac[:, None] * step[side]}
        v = rng.uniform(-1.0, 1.0, size=(n, p))
        face = rng.integers(0, p, size=n)
        v[np.arange(n), face] = rng.choice([-1.0, 1.0], size=n)
        return {"v": v}

    def place(self, fib, tau):
        v = fib["v"]
        a = tau ** (1.0 / self.p)
        pts = angles_to_points(wrap_angle(self.t + np.pi * a * v))
        vn = np.linalg.norm(v, axis=1, keepdims=True)
        direction = np.empty_like(pts)
        tang = circle_tangent(self.t)  # (p, 2)
        for i in range(self.p):
            direction[:, 2 * i:2 * i + 2] = (v[:, i:i + 1] / vn) * tang[i]
        base = np.broadcast_to(self.pole, pts.shape).copy()
        return pts, base, direction, np.pi * a * vn[:, 0]

    def level(self, y):
        off = np.abs(wrap_angle(points_to_angles(self.spec.check(y)) - self.t))
        return (np.max(off, axis=-1) / np.pi) ** self.p


class _FactorCap(_Layout):
    def __init__(self, spec, j, point, frame):
        super().__init__(spec)
        self.j, self.pj = j, spec.factors[j]
        self.point = point
        self.sj = point[spec.slices[j]]
        self.singleton = spec.k == 1
        self.sided = self.pj == 1
        if self.pj == 1:
            self.frame = circle_tangent(math.atan2(self.sj[1], self.sj[0]))[:, None]
        else:
            self.frame = tangent_frame(self.sj) if frame is None else np.asarray(frame, float)

    def center_point(self):
        return self.point

    def _rest(self, n, rng, equi, sides):
        if equi and self.pj == 1 and self.spec.k == 2:
            # the free factor is a circle: equispaced, shared by both sides
            other = 1 - self.j
            counts = n // 2 if sides is not None else n
            a = _equispaced_angles(counts, rng)
            if sides is not None:
                a = np.concatenate([a, a])
            rest = np.zeros((n, self.spec.ambient_dim))
            rest[:, self.spec.slices[other]] = np.stack([np.cos(a), np.sin(a)], 1)
            return rest
        return uniform_sample(self.spec, n, rng)

    def fibers(self, n, rng, equi, sided):
        if self.pj == 1:
            sides = _halves(n) if sided else None
            g = (sides if sided else np.ones(n))[:, None]
        elif equi and self.pj == 2:
            a = _equispaced_angles(n, rng)
            g, sides = np.stack([np.cos(a), np.sin(a)], 1), None
        else:
            g, sides = _unit_rows(n, self.pj, rng), None
        return {"g": g, "rest": self._rest(n, rng, equi, sides)}

    def place(self, fib, tau):
        s = self.spec.slices[self.j]
        rho = np.pi * latitude_profile(self.pj, tau)
        u = fib["g"] @ self.frame.T
        fj = np.cos(rho) * self.sj + np.sin(rho) * u
        pts = fib["rest"].copy()
        pts[:, s] = fj / np.linalg.norm(fj, axis=1, keepdims=True)
        base = fib["rest"].copy()
        base[:, s] = self.sj
        direction = np.zeros_like(pts)
        direction[:, s] = u
        return pts, base, direction, np.full(len(pts), rho)

    def level(self, y):
        yj = self.spec.check(y)[..., self.spec.slices[self.j]]
        d = geodesic_distance(ManifoldSpec((self.pj,)), self.sj, yj)
        return cap_content_closed(self.pj, d)


class _Strip(_Layout):
    sided = True

    def __init__(self, spec, j, point, frame):
        super().__init__(spec)
        self.j, self.pj = j, spec.factors[j]
        if self.pj < 2:
            raise GridError("spherical strips need a factor of dimension >= 2; use TorusEquator on circles")
        self.point = point
        self.theta = point[spec.slices[j]]
        self.frame = tangent_frame(self.theta) if frame is None else np.asarray(frame, float)

    def center_point(self):
        return self.point

    def fibers(self, n, rng, equi, sided):
        sides = _halves(n) if sided else np.ones(n)
        if equi and self.pj == 2:
            if sided:
                a = _equispaced_angles(n // 2, rng)
                a = np.concatenate([a, a])
            else:
                a = _equispaced_angles(n, rng)
            e = np.stack([np.cos(a), np.sin(a)], 1)
        else:
            e = _unit_rows(n, self.pj, rng)
        return {"e": e, "side": sides, "rest": uniform_sample(self.spec, n, rng)}

    def place(self, fib, tau):
        s = self.spec.slices[self.j]
        delta = 0.0 if tau == 0 else 0.5 * np.pi * (1.0 - 2.0 * latitude_profile(self.pj, (1.0 - tau) / 2.0))
        ye = fib["e"] @ self.frame.T
        side = fib["side"][:, None]
        fj = np.cos(delta) * ye + np.sin(delta) * side * self.theta
        pts = fib["rest"].copy()
        pts[:, s] = fj / np.linalg.norm(fj, axis=1, keepdims=True)
        base = fib["rest"].copy()
        base[:, s] = ye
        direction = np.zeros_like(pts)
        direction[:, s] = side * self.theta
        return pts, base, direction, np.full(len(pts), delta)

    def level(self, y):
        yj = self.spec.check(y)[..., self.spec.slices[self.j]]
        colat = geodesic_distance(ManifoldSpec((self.pj,)), self.theta, yj)
        return np.abs(1.0 - 2.0 * cap_content_closed(self.pj, colat))


def _layout(spec, center) -> _Layout:
    spec = as_spec(spec)
    if isinstance(center, TorusEquator):
        j = center.component
        if not 0 <= j < spec.k or spec.factors[j] != 1:
            raise GridError(f"component {j} is not a circle factor of {spec}")
        point = uniform_sample(spec, 1, 0)[0]
        point[spec.slices[j]] = [math.cos(center.angle), math.sin(center.angle)]
        return _FactorCap(spec, j, point, None)
    if isinstance(center, Cap):
        pole = spec.check(center.pole, "pole")
        if spec.is_torus:
            return _TorusCap(spec, pole)
        if spec.k == 1:
            return _SphereCap(spec, pole, center.frame)
        raise GridError(f"caps on {spec} are not defined; use FactorCap")
    if isinstance(center, (FactorCap, Strip)):
        if not 0 <= center.factor < spec.k:
            raise GridError(f"factor {center.factor} out of range for {spec}")
        point = spec.check(center.point, "center point")
        cls = _FactorCap if isinstance(center, FactorCap) else _Strip
        return cls(spec, center.factor, point, center.frame)
    raise GridError(f"unsupported center {center!r}")


def contour_level(spec, center, y):
    """Uniform probability content of the smallest region around ``center``
    whose closure contains ``y`` (the ring level of ``y``)."""
    return _layout(spec, center).level(y)


def default_mode(spec, center) -> GridMode:
    lay = _layout(spec, center)
    return GridMode.EQUISPACED if lay.contour_dim == 1 else GridMode.IID


# -- structured grid -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StructuredGrid:
    points: np.ndarray
    ring: np.ndarray
    base: np.ndarray  # point of the center submanifold each grid point grows from
    direction: np.ndarray  # unit normal direction at ``base`` (zero on ring 0)
    arc: np.ndarray  # geodesic length from ``base``
    fiber: np.ndarray  # shared geodesic index for fibered grids, else -1
    n_0: int
    n_R: int
    n_S: int
    center: object
    mode: GridMode
    spec: ManifoldSpec

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def levels(self):
        return np.arange(self.n_R + 1) / (self.n_R + 1)


def build_grid(spec, center, n_R, n_S, n_0, seed=None, mode=None) -> StructuredGrid:
    """Center copies plus ``n_R`` rings of ``n_S`` points on the uniform contours
    of order r/(n_R + 1)."""
    spec = as_spec(spec)
    lay = _layout(spec, center)
    mode = default_mode(spec, center) if mode is None else GridMode(mode)
    if n_R < 1 or n_S < 1 or n_0 < 0:
        raise GridError("need n_R >= 1, n_S >= 1, n_0 >= 0")
    if lay.singleton and n_0 < 1:
        raise GridError("single-point centers need n_0 >= 1")
    if mode is GridMode.EQUISPACED and lay.contour_dim != 1:
        raise GridError("equispaced rings only exist for one-dimensional contours")
    if lay.sided and n_S % 2:
        raise GridError(f"two-sided contours need an even n_S, got {n_S}")
    rng = np.random.default_rng(seed)
    equi_rings = mode is not GridMode.IID and lay.contour_dim == 1

    blocks = []
    if n_0:
        if lay.singleton:
            c = np.asarray(lay.center_point(), float)
            pts = np.broadcast_to(c, (n_0, spec.ambient_dim)).copy()
            blocks.append((pts, pts.copy(), np.zeros_like(pts), np.zeros(n_0), 0, np.full(n_0, -1)))
        else:
            m0_dim = spec.dim - 1 if isinstance(lay, _Strip) else spec.dim - lay.pj
            fib = lay.fibers(n_0, rng, mode is not GridMode.IID and m0_dim == 1, sided=False)
            pts, base, _, _ = lay.place(fib, 0.0)
            blocks.append((pts, base, np.zeros_like(pts), np.zeros(n_0), 0, np.full(n_0, -1)))
    shared = lay.fibers(n_S, rng, equi_rings, sided=True) if mode is GridMode.FIBERED else None
    for r in range(1, n_R + 1):
        fib = shared if shared is not None else lay.fibers(n_S, rng, equi_rings, sided=True)
        pts, base, direction, arc = lay.place(fib, r / (n_R + 1))
        fid = np.arange(n_S) if shared is not None else np.full(n_S, -1)
        blocks.append((pts, base, direction, arc, r, fid))

    pts = np.concatenate([b[0] for b in blocks])
    return StructuredGrid(
        points=pts,
        ring=np.concatenate([np.full(len(b[0]), b[4]) for b in blocks]).astype(np.int64),
        base=np.concatenate([b[1] for b in blocks]),
        direction=np.concatenate([b[2] for b in blocks]),
        arc=np.concatenate([b[3] for b in blocks]),
        fiber=np.concatenate([b[5] for b in blocks]).astype(np.int64),
        n_0=int(n_0),
        n_R=int(n_R),
        n_S=int(n_S),
        center=center,
        mode=mode,
        spec=spec,
    )


# -- fitting -------------------------------------------------------------------

@dataclass(frozen=True)
class FrechetCap:
    """Cap regions around the Step-1 image of the Fréchet mean."""

    def make(self, spec, pole):
        return Cap(pole)


@dataclass(frozen=True)
class FrechetStrip:
    """Strip regions in factor ``factor``; circles get toroidal equators."""

    factor: int = 0

    def make(self, spec, pole):
        s = spec.slices[self.factor]
        if spec.factors[self.factor] == 1:
            return TorusEquator(self.factor, float(math.atan2(pole[s][1], pole[s][0])))
        return Strip(self.factor, pole)


@dataclass(frozen=True)
class FrechetFactorCap:
    """Polyspherical caps in factor ``factor``."""

    factor: int = 0

    def make(self, spec, pole):
        return FactorCap(self.factor, pole)


@dataclass(frozen=True, eq=False)
class FixedCenter:
    """Skip Step 1 and use a given center."""

    center: object


def center_rule(name: str, factor: int = 0):
    name = name.lower()
    if name == "cap":
        return FrechetCap()
    if name == "strip":
        return FrechetStrip(factor)
    if name in ("factor-cap", "factor_cap", "polycap"):
        return FrechetFactorCap(factor)
    raise ValueError(f"unknown center rule {name!r}")


def grid_seeds(seed, stream=0):
    """Independent seed sequences for the Step-1 and Step-2 grids of ``stream``."""
    root = np.random.SeedSequence(seed)
    return (
        np.random.SeedSequence(root.entropy, spawn_key=(int(stream), 1)),
        np.random.SeedSequence(root.entropy, spawn_key=(int(stream), 2)),
    )


def check_distinct(sample):
    _, counts = np.unique(sample, axis=0, return_counts=True)
    if np.any(counts > 1):
        raise DuplicatePoints(f"{int(np.sum(counts - 1))} duplicated sample points")


@dataclass(frozen=True, eq=False)
class QuantileFit:
    spec: ManifoldSpec
    sample: np.ndarray
    grid: StructuredGrid
    perm: np.ndarray  # sample index -> grid index
    ranks: np.ndarray
    signs: np.ndarray
    center: object
    theta_hat: np.ndarray
    pole: np.ndarray | None
    objective: float
    step1_perm: np.ndarray | None = field(default=None, repr=False)

    @property
    def images(self):
        """F*(Y_i): the grid point each observation is transported to."""
        return self.grid.points[self.perm]

    @property
    def n_R(self):
        return self.grid.n_R

    def _check_r(self, r):
        lo = 0 if self.grid.n_0 else 1
        if not lo <= r <= self.grid.n_R:
            raise ContourRangeError(f"r={r} outside {lo}..{self.grid.n_R}")

    def contour_indices(self, r):
        """Observations on the contour of order r/(n_R+1), in grid order."""
        self._check_r(r)
        idx = np.flatnonzero(self.ranks == r)
        return idx[np.argsort(self.perm[idx], kind="stable")]

    def region_indices(self, r):
        self._check_r(r)
        return np.flatnonzero(self.ranks <= r)

    def contour(self, r):
        return self.sample[self.contour_indices(r)]

    def region(self, r):
        return self.sample[self.region_indices(r)]

    def to_json(self):
        return {
            "manifold": self.spec.name,
            "sample": self.sample.tolist(),
            "grid": self.grid.points.tolist(),
            "ring": self.grid.ring.tolist(),
            "perm": self.perm.tolist(),
            "ranks": self.ranks.tolist(),
            "signs": self.signs.tolist(),
            "center": self.center.to_json(),
            "objective": self.objective,
        }


def extract_contour(fit: QuantileFit, r):
    return fit.contour(r)


def extract_region(fit: QuantileFit, r):
    return fit.region(r)


def fit_quantiles(spec, sample, center_rule=FrechetCap(), n_R=None, n_S=None, n_0=1,
                  seed=None, grid_mode=None, stream=0) -> QuantileFit:
    """Two-step empirical quantile fit with ranks and signs."""
    spec = as_spec(spec)
    y = np.atleast_2d(spec.check(sample, "sample"))
    n = y.shape[0]
    if n_R is None or n_S is None or n != n_0 + n_R * n_S:
        raise GridError(f"sample size {n} != n_0 + n_R n_S = {n_0} + {n_R}*{n_S}")
    if not spec.is_point(y, tol=1e-9):
        raise GeometryError("sample rows are not points of the manifold")
    check_distinct(y)
    s1, s2 = grid_seeds(seed, stream)

    step1 = None
    if isinstance(center_rule, FixedCenter):
        center = center_rule.center
        theta = np.asarray(_layout(spec, center).center_point(), float)
        pole = None
    else:
        theta = frechet_mean(spec, y)
        grid0 = uniform_sample(spec, n, s1)
        step1 = solve_assignment(cost_matrix(spec, y, grid0)).perm
        i_star = int(np.argmin(geodesic_distance(spec, y, theta)))
        pole = grid0[step1[i_star]]
        center = center_rule.make(spec, pole)

    grid = build_grid(spec, center, n_R, n_S, n_0, s2, grid_mode)
    plan = solve_assignment(cost_matrix(spec, y, grid.points))
    perm = plan.perm.copy()
    if n_0 > 1 and _layout(spec, center).singleton:
        # identical center copies: hand them out in sample-index order
        hits = np.flatnonzero(grid.ring[perm] == 0)
        perm[hits] = np.sort(perm[hits])
    ranks = grid.ring[perm]
    signs = grid.direction[perm]
    return QuantileFit(spec, y, grid, perm, ranks, signs, center, theta, pole, plan.objective, step1)


def hausdorff_distance(spec, a, b):
    """Hausdorff distance between two finite point sets."""
    spec = as_spec(spec)
    a, b = np.atleast_2d(spec.check(a)), np.atleast_2d(spec.check(b))
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("Hausdorff distance needs nonempty sets")
    d = pairwise_distances_exact(spec, a, b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))
