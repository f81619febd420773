"""Sampling and densities for the simulation families.

All samplers take an explicit seed (int, ``SeedSequence`` or ``None``) and
build a local generator. Densities are with respect to the Riemannian volume
of the manifold (surface measure on S^p, d phi_1 d phi_2 on the torus).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import betaln, gammaln, ive, logsumexp

from .geometry import (
    ManifoldSpec,
    angles_to_points,
    as_spec,
    points_to_angles,
    tangent_frame,
    uniform_sample,
)

log = logging.getLogger(__name__)

BSVM_QUAD_POINTS = 512


def as_seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return seed.bit_generator.seed_seq
    return np.random.SeedSequence(seed)


def sphere_log_volume(p: int) -> float:
    """log of the surface area of the unit p-sphere."""
    return np.log(2.0) + 0.5 * (p + 1) * np.log(np.pi) - gammaln(0.5 * (p + 1))


# -- low-level vectorized samplers ---------------------------------------------

def vmf_latitude(kappa, m, rng, batch=None):
    """Draw w = y'mu for vMF on S^{m-1} by Wood's rejection scheme.

    ``kappa`` is an array; one latitude is drawn per entry.
    """
    kappa = np.asarray(kappa, dtype=float)
    out = np.empty(kappa.shape)
    flat_k, flat_out = kappa.ravel(), out.reshape(-1)
    d = m - 1.0
    b = d / (np.sqrt(4.0 * flat_k**2 + d**2) + 2.0 * flat_k)
    x0 = (1.0 - b) / (1.0 + b)
    c = flat_k * x0 + d * np.log1p(-x0**2)
    pending = np.arange(flat_k.size)
    while pending.size:
        z = rng.beta(d / 2.0, d / 2.0, size=pending.size)
        bp, x0p, kp = b[pending], x0[pending], flat_k[pending]
        w = (1.0 - (1.0 + bp) * z) / (1.0 - (1.0 - bp) * z)
        u = rng.random(pending.size)
        ok = kp * w + d * np.log1p(-x0p * w) - c[pending] >= np.log(u)
        flat_out[pending[ok]] = w[ok]
        pending = pending[~ok]
    return out


def sample_vmf_array(mu, kappa, rng):
    """One vMF draw per row; ``mu`` is (n, m) or (m,), ``kappa`` is (n,)."""
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    n = kappa.shape[0]
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n, np.shape(mu)[-1]))
    m = mu.shape[1]
    w = vmf_latitude(kappa, m, rng)
    g = rng.standard_normal((n, m))
    g -= np.sum(g * mu, axis=1, keepdims=True) * mu
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    y = w[:, None] * mu + np.sqrt(np.clip(1.0 - w**2, 0.0, None))[:, None] * g
    return y / np.linalg.norm(y, axis=1, keepdims=True)


def sample_bsvm_angles(mu1, mu2, kappa1, kappa2, lam, n, rng):
    """Rejection sampler for the bivariate sine von Mises law.

    Proposal: independent von Mises marginals; envelope bound uses
    lam*sin*sin <= |lam|. Parameters broadcast against ``n`` draws.
    Returns angles in [-pi, pi) and the acceptance rate.
    """
    params = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (mu1, mu2, kappa1, kappa2, lam)))
    mu1, mu2, k1, k2, lam = (np.broadcast_to(a, (n,)) for a in params)
    out = np.empty((n, 2))
    pending = np.arange(n)
    proposed = 0
    while pending.size:
        a1 = rng.vonmises(0.0, k1[pending])
        a2 = rng.vonmises(0.0, k2[pending])
        lp = lam[pending]
        u = rng.random(pending.size)
        ok = np.log(u) <= lp * np.sin(a1) * np.sin(a2) - np.abs(lp)
        proposed += pending.size
        idx = pending[ok]
        out[idx, 0] = a1[ok] + mu1[idx]
        out[idx, 1] = a2[ok] + mu2[idx]
        pending = pending[~ok]
    rate = n / proposed if proposed else 1.0
    out = (out + np.pi) % (2 * np.pi) - np.pi
    return out, rate


# -- distribution objects ------------------------------------------------------

class Distribution:
    spec: ManifoldSpec

    def sample(self, n, seed=None):
        raise NotImplementedError

    def logpdf(self, y):
        raise NotImplementedError

    def pdf(self, y):
        return np.exp(self.logpdf(y))


@dataclass
class Uniform(Distribution):
    spec: ManifoldSpec

    def __post_init__(self):
        self.spec = as_spec(self.spec)

    def sample(self, n, seed=None):
        return uniform_sample(self.spec, n, as_seed_sequence(seed))

    def logpdf(self, y):
        y = self.spec.check(y)
        lv = sum(sphere_log_volume(p) for p in self.spec.factors)
        return np.full(y.shape[:-1], -lv)


@dataclass
class VonMisesFisher(Distribution):
    mu: np.ndarray
    kappa: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        if abs(np.linalg.norm(self.mu) - 1.0) > 1e-12:
            raise ValueError("vMF location must be a unit vector")
        if self.kappa < 0:
            raise ValueError("vMF concentration must be nonnegative")
        self.spec = ManifoldSpec((self.mu.size - 1,))

    def sample(self, n, seed=None):
        rng = np.random.default_rng(as_seed_sequence(seed))
        return sample_vmf_array(self.mu, np.full(int(n), float(self.kappa)), rng)

    def log_normalizer(self):
        """log C_kappa for the density C_kappa exp(kappa y'mu)."""
        m, k = self.mu.size, float(self.kappa)
        if k == 0.0:
            return -sphere_log_volume(m - 1)
        if m == 3:
            # kappa / (4 pi sinh kappa), written stably
            return np.log(k) - np.log(2 * np.pi) - k - np.log1p(-np.exp(-2 * k))
        v = m / 2.0 - 1.0
        return v * np.log(k) - (m / 2.0) * np.log(2 * np.pi) - (np.log(ive(v, k)) + k)

    def logpdf(self, y):
        y = self.spec.check(y)
        return self.log_normalizer() + self.kappa * (y @ self.mu)


@dataclass
class TangentVMF(Distribution):
    """Y = V mu + sqrt(1 - V^2) Gamma_mu U with V = 2 Beta(a, b) - 1 and
    U ~ vMF(nu, kappa) on the unit sphere of the tangent space at mu."""

    mu: np.ndarray
    nu: np.ndarray
    kappa: float
    beta_a: float
    beta_b: float

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.nu = np.asarray(self.nu, dtype=float)
        if abs(np.linalg.norm(self.mu) - 1.0) > 1e-12 or abs(np.linalg.norm(self.nu) - 1.0) > 1e-12:
            raise ValueError("mu and nu must be unit vectors")
        if self.nu.size != self.mu.size - 1:
            raise ValueError("nu lives in R^p for mu on S^p")
        if self.beta_a <= 0 or self.beta_b <= 0 or self.kappa < 0:
            raise ValueError("invalid tangent vMF parameters")
        self.spec = ManifoldSpec((self.mu.size - 1,))
        self.gamma = tangent_frame(self.mu)

    def sample(self, n, seed=None):
        rng = np.random.default_rng(as_seed_sequence(seed))
        n = int(n)
        v = 2.0 * rng.beta(self.beta_a, self.beta_b, size=n) - 1.0
        u = sample_vmf_array(self.nu, np.full(n, float(self.kappa)), rng)
        y = v[:, None] * self.mu + np.sqrt(np.clip(1 - v**2, 0, None))[:, None] * (u @ self.gamma.T)
        return y / np.linalg.norm(y, axis=1, keepdims=True)

    def logpdf(self, y):
        y = self.spec.check(y)
        p = self.mu.size - 1
        v = np.clip(y @ self.mu, -1 + 1e-15, 1 - 1e-15)
        r = np.sqrt(1 - v**2)
        u = (y @ self.gamma) / r[..., None]
        t = (v + 1) / 2
        log_g = (
            (self.beta_a - 1) * np.log(t) + (self.beta_b - 1) * np.log1p(-t)
            - betaln(self.beta_a, self.beta_b) - np.log(2.0)
        )
        log_u = VonMisesFisher(self.nu, self.kappa).logpdf(u)
        return log_g + log_u - 0.5 * (p - 2) * np.log(r**2)


@lru_cache(maxsize=256)
def bsvm_log_normalizer(kappa1, kappa2, lam, points=BSVM_QUAD_POINTS):
    """log of 1/Z by the periodic trapezoid rule on a points x points grid."""
    phi = -np.pi + 2 * np.pi * np.arange(points) / points
    s, c = np.sin(phi), np.cos(phi)
    expo = kappa1 * c[:, None] + kappa2 * c[None, :] + lam * s[:, None] * s[None, :]
    shift = expo.max()
    z = np.log(np.sum(np.exp(expo - shift))) + shift + 2 * np.log(2 * np.pi / points)
    return -z


@dataclass
class BivariateSineVonMises(Distribution):
    mu: tuple = (0.0, 0.0)
    kappa: tuple = (0.0, 0.0)
    lam: float = 0.0
    acceptance_rate: float | None = field(default=None, repr=False)

    def __post_init__(self):
        self.mu = tuple(float(a) for a in self.mu)
        self.kappa = tuple(float(a) for a in self.kappa)
        self.lam = float(self.lam)
        if min(self.kappa) < 0:
            raise ValueError("BSvM concentrations must be nonnegative")
        self.spec = ManifoldSpec((1, 1))

    def sample_angles(self, n, seed=None):
        rng = np.random.default_rng(as_seed_sequence(seed))
        ang, rate = sample_bsvm_angles(*self.mu, *self.kappa, self.lam, int(n), rng)
        self.acceptance_rate = rate
        log.debug("BSvM%s acceptance rate %.4f", (self.kappa, self.lam), rate)
        if rate < 0.01:
            log.warning("BSvM acceptance rate %.2e for kappa=%s lam=%s", rate, self.kappa, self.lam)
        return ang

    def sample(self, n, seed=None):
        return angles_to_points(self.sample_angles(n, seed))

    def logpdf_angles(self, phi1, phi2):
        a1 = np.asarray(phi1) - self.mu[0]
        a2 = np.asarray(phi2) - self.mu[1]
        return (
            bsvm_log_normalizer(*self.kappa, self.lam)
            + self.kappa[0] * np.cos(a1) + self.kappa[1] * np.cos(a2)
            + self.lam * np.sin(a1) * np.sin(a2)
        )

    def logpdf(self, y):
        ang = points_to_angles(self.spec.check(y))
        return self.logpdf_angles(ang[..., 0], ang[..., 1])


@dataclass
class Mixture(Distribution):
    """Finite mixture; component ``c`` draws from child ``c + 1`` of the seed
    sequence, child 0 drives the component labels."""

    weights: tuple
    components: tuple

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.components = tuple(self.components)
        if len(self.weights) != len(self.components) or not self.components:
            raise ValueError("need one weight per component")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12:
            raise ValueError("mixture weights must be a probability vector")
        specs = {c.spec for c in self.components}
        if len(specs) != 1:
            raise ValueError("mixture components live on different manifolds")
        self.spec = specs.pop()

    def labels(self, u):
        idx = np.searchsorted(np.cumsum(self.weights), u, side="left")
        return np.minimum(idx, len(self.weights) - 1)

    def sample(self, n, seed=None, return_labels=False):
        n = int(n)
        children = as_seed_sequence(seed).spawn(len(self.components) + 1)
        lab = self.labels(np.random.default_rng(children[0]).random(n))
        out = np.empty((n, self.spec.ambient_dim))
        for c, comp in enumerate(self.components):
            sel = lab == c
            if sel.any():
                out[sel] = comp.sample(int(sel.sum()), children[c + 1])
        return (out, lab) if return_labels else out

    def logpdf(self, y):
        parts = np.stack([np.log(w) + c.logpdf(y) for w, c in zip(self.weights, self.components) if w > 0])
        return logsumexp(parts, axis=0)
