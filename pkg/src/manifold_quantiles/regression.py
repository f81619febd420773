"""Nonparametric quantile regression for manifold-valued responses.

Covariates live in a metric space (Euclidean or a product of spheres).
Local weights at a query ``x`` turn the sample into a weighted empirical
conditional law, which is transported to uniform grids by exact
Kantorovich programs.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .geometry import ManifoldSpec, as_spec, geodesic_distance, pairwise_distances, uniform_sample
from .quantiles import (
    ContourRangeError,
    FixedCenter,
    FrechetCap,
    StructuredGrid,
    _layout,
    build_grid,
    frechet_mean,
    grid_seeds,
)
from .transport import Coupling, cost_matrix, solve_kantorovich

MASS_TIE_RTOL = 1e-9


class EmptyWindow(ValueError):
    """No covariate lies within the kernel bandwidth of the query."""


@dataclass(frozen=True)
class CovariateSpace:
    kind: str  # "euclidean" or "manifold"
    dim: int = 1
    manifold: ManifoldSpec | None = None

    def __post_init__(self):
        if self.kind == "euclidean" and self.dim < 1:
            raise ValueError("Euclidean covariates need dimension >= 1")
        if self.kind == "manifold" and self.manifold is None:
            raise ValueError("manifold covariates need a ManifoldSpec")
        if self.kind not in ("euclidean", "manifold"):
            raise ValueError(f"unknown covariate space {self.kind!r}")

    @classmethod
    def euclidean(cls, dim=1):
        return cls("euclidean", int(dim))

    @classmethod
    def on(cls, spec):
        spec = as_spec(spec)
        return cls("manifold", spec.ambient_dim, spec)

    @classmethod
    def parse(cls, text):
        m = re.fullmatch(r"r(\d+)", text.strip().lower())
        return cls.euclidean(int(m.group(1))) if m else cls.on(text)

    @property
    def name(self):
        return f"r{self.dim}" if self.kind == "euclidean" else self.manifold.name

    @property
    def width(self):
        """Number of stored coordinates per covariate."""
        return self.dim

    def as_rows(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or (x.ndim == 1 and self.width == 1 and x.shape[0] != 1):
            x = x.reshape(-1, 1)
        x = np.atleast_2d(x)
        if x.shape[-1] != self.width:
            raise ValueError(f"covariates need {self.width} coordinates, got {x.shape[-1]}")
        return x

    def distances(self, x, covariates):
        """d_X(x, X_j) for every row of ``covariates``."""
        xs = self.as_rows(x)[0]
        cov = self.as_rows(covariates)
        if self.kind == "euclidean":
            return np.linalg.norm(cov - xs, axis=1)
        return geodesic_distance(self.manifold, cov, xs)


@dataclass(frozen=True)
class Knn:
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")

    def __call__(self, space, x, covariates):
        return knn_weights(x, covariates, self.k, space)

    def describe(self):
        return {"weights": "knn", "k": self.k}


@dataclass(frozen=True)
class Kernel:
    h: float
    kernel: str = "trimmed_gaussian"

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in ("trimmed_gaussian", "box"):
            raise ValueError(f"unknown kernel {self.kernel!r}")

    def __call__(self, space, x, covariates):
        return kernel_weights(x, covariates, self.h, self.kernel, space)

    def describe(self):
        return {"weights": "kernel", "h": self.h, "kernel": self.kernel}


def _space_for(covariates, space):
    if space is not None:
        return space
    return CovariateSpace.euclidean(np.atleast_2d(np.asarray(covariates, float)).shape[-1])


def knn_weights(x, covariates, k, space=None):
    """1/k on the k nearest covariates; distance ties go to the smaller index."""
    space = _space_for(covariates, space)
    d = space.distances(x, covariates)
    if k > d.size:
        raise ValueError(f"k={k} exceeds the sample size {d.size}")
    w = np.zeros(d.size)
    w[np.argsort(d, kind="stable")[:k]] = 1.0 / k
    return w


def kernel_weights(x, covariates, h, kernel="trimmed_gaussian", space=None):
    """w_j proportional to K(d(x, X_j)/h); the window u <= 1 is closed."""
    space = _space_for(covariates, space)
    u = space.distances(x, covariates) / h
    inside = u <= 1.0
    if not inside.any():
        raise EmptyWindow(f"no covariate within h={h:g} of the query")
    k = np.where(inside, np.exp(-(u**2)) if kernel == "trimmed_gaussian" else 1.0, 0.0)
    return k / k.sum()


def conditional_frechet_mean(spec, responses, weights):
    return frechet_mean(spec, responses, weights)


@dataclass(frozen=True, eq=False)
class ConditionalFit:
    spec: ManifoldSpec
    x: np.ndarray
    weights: np.ndarray
    responses: np.ndarray = field(repr=False)
    theta_hat: np.ndarray
    pole: np.ndarray | None
    center: object
    grid: StructuredGrid
    coupling: Coupling = field(repr=False)  # columns index ``support``
    q_index: np.ndarray  # grid point -> index of its sample image

    @property
    def images(self):
        """Q_w(g | x) for every grid point g."""
        return self.responses[self.q_index]

    @property
    def support(self):
        """Sample indices with positive weight."""
        return np.flatnonzero(self.weights > 0)

    @property
    def distinct_images(self):
        return int(np.unique(self.q_index).size)

    def _check_r(self, r):
        lo = 0 if self.grid.n_0 else 1
        if not lo <= r <= self.grid.n_R:
            raise ContourRangeError(f"r={r} outside {lo}..{self.grid.n_R}")

    @staticmethod
    def _unique_in_order(idx):
        _, first = np.unique(idx, return_index=True)
        return idx[np.sort(first)]

    def contour_indices(self, r):
        """Sample indices hit by ring ``r``, duplicates collapsed, grid order."""
        self._check_r(r)
        return self._unique_in_order(self.q_index[self.grid.ring == r])

    def region_indices(self, r):
        self._check_r(r)
        return self._unique_in_order(self.q_index[self.grid.ring <= r])

    def contour(self, r):
        return self.responses[self.contour_indices(r)]

    def region(self, r):
        return self.responses[self.region_indices(r)]


def extract_conditional_contour(fit: ConditionalFit, r):
    return fit.contour(r)


def extract_conditional_region(fit: ConditionalFit, r):
    return fit.region(r)


def _row_argmax(coupling, n_rows, key_primary, key_secondary):
    """Per row, the column of maximal mass; near-ties by the two keys."""
    rows, cols, mass = coupling.rows, coupling.cols, coupling.mass
    top = np.zeros(n_rows)
    np.maximum.at(top, rows, mass)
    cand = mass >= top[rows] * (1.0 - MASS_TIE_RTOL)
    r, c = rows[cand], cols[cand]
    order = np.lexsort((key_secondary[c], key_primary[c], r))
    r, c = r[order], c[order]
    first = np.r_[True, r[1:] != r[:-1]]
    out = np.full(n_rows, -1, dtype=np.int64)
    out[r[first]] = c[first]
    return out


def fit_conditional(spec, cov_space, covariates, responses, x, weight_fn, N_R, N_S, N_0=1,
                    seed=None, center_rule=FrechetCap(), grid_mode=None, stream=0) -> ConditionalFit:
    """Two-step empirical conditional quantiles at the query ``x``."""
    spec = as_spec(spec)
    y = np.atleast_2d(spec.check(responses, "responses"))
    cov = cov_space.as_rows(covariates)
    if cov.shape[0] != y.shape[0]:
        raise ValueError("covariates and responses differ in length")
    N = N_0 + N_R * N_S
    w = weight_fn(cov_space, x, cov)
    sup = np.flatnonzero(w > 0)
    ys, ws = y[sup], w[sup]
    s1, s2 = grid_seeds(seed, stream)

    if isinstance(center_rule, FixedCenter):
        center = center_rule.center
        theta = np.asarray(_layout(spec, center).center_point(), float)
        pole = None
    else:
        theta = frechet_mean(spec, y, w)
        grid0 = uniform_sample(spec, N, s1)
        plan0 = solve_kantorovich(cost_matrix(spec, grid0, ys), ws)
        j_star = int(np.argmin(geodesic_distance(spec, ys, theta)))
        on_col = plan0.cols == j_star
        rows, mass = plan0.rows[on_col], plan0.mass[on_col]
        best = rows[mass >= mass.max() * (1.0 - MASS_TIE_RTOL)]
        near = geodesic_distance(spec, grid0[best], theta)
        pole = grid0[best[int(np.argmin(near))]]
        center = center_rule.make(spec, pole)

    grid = build_grid(spec, center, N_R, N_S, N_0, s2, grid_mode)
    plan = solve_kantorovich(cost_matrix(spec, grid.points, ys), ws)
    if N_0:
        to_center = pairwise_distances(spec, ys, grid.points[grid.ring == 0]).min(axis=1)
    else:
        to_center = np.zeros(sup.size)
    local = _row_argmax(plan, N, to_center, np.arange(sup.size))
    if np.any(local < 0):
        raise RuntimeError("a grid point received no mass")
    return ConditionalFit(
        spec=spec,
        x=cov_space.as_rows(x)[0],
        weights=w,
        responses=y,
        theta_hat=theta,
        pole=pole,
        center=center,
        grid=grid,
        coupling=plan,
        q_index=sup[local],
    )
