"""Named simulation settings: unconditional samples and regression models."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import (
    BivariateSineVonMises,
    Distribution,
    Mixture,
    TangentVMF,
    Uniform,
    VonMisesFisher,
    as_seed_sequence,
    sample_bsvm_angles,
    sample_vmf_array,
)
from .geometry import ManifoldSpec, angles_to_points, as_spec
from .regression import CovariateSpace

T2 = ManifoldSpec((1, 1))
S2 = ManifoldSpec((2,))
NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])
NU = np.array([0.7, np.sqrt(0.51)])
MIX3_MU = (
    np.array([0.3, 0.4, np.sqrt(0.75)]),
    np.array([-0.3, -0.4, np.sqrt(0.75)]),
    np.array([-0.3, 0.2, np.sqrt(0.87)]),
)
BSVM3 = (
    ((-np.pi / 2, np.pi / 2), -2.0),
    ((np.pi / 2, np.pi / 2), 2.0),
    ((0.0, -np.pi / 5), 0.0),
)
W3 = (3 / 7, 3 / 7, 1 / 7)


@dataclass(frozen=True, eq=False)
class Preset:
    name: str
    dist: Distribution
    region: str  # "cap" or "strip"
    factor: int = 0

    @property
    def spec(self):
        return self.dist.spec

    def sample(self, n, seed=None):
        return self.dist.sample(n, seed)


def _t3():
    comps = [BivariateSineVonMises(mu, k, lam) for (mu, lam), k in zip(BSVM3, [(4, 4), (4, 4), (6, 6)])]
    return Mixture(W3, comps)


def _s3():
    return Mixture((0.3, 0.3, 0.4), [VonMisesFisher(m, 20.0) for m in MIX3_MU])


def _build_presets():
    return {
        "T1": Preset("T1", BivariateSineVonMises((0, 0), (3, 3), 0.0), "cap"),
        "T2": Preset("T2", BivariateSineVonMises((0, 0), (3, 3), 1.5), "cap"),
        "T3": Preset("T3", _t3(), "cap"),
        "S1": Preset("S1", VonMisesFisher(NORTH, 10.0), "cap"),
        "S2": Preset("S2", TangentVMF(NORTH, NU, 10.0, 2.0, 8.0), "cap"),
        "S3": Preset("S3", _s3(), "cap"),
        "Ta": Preset("Ta", BivariateSineVonMises((0, 0), (2.5, 0), 0.0), "strip"),
        "Tb": Preset("Tb", BivariateSineVonMises((0, 0), (2.5, 0), 2.0), "strip"),
        "Tc": Preset("Tc", _t3(), "strip"),
        "Sa": Preset("Sa", Mixture((0.3, 0.7), [VonMisesFisher(NORTH, 1.0), VonMisesFisher(SOUTH, 2.0)]), "strip"),
        "Sb": Preset(
            "Sb",
            Mixture((0.3, 0.7), [TangentVMF(NORTH, NU, 2.0, 5.0, 2.0), VonMisesFisher(SOUTH, 3.0)]),
            "strip",
        ),
        "Sc": Preset("Sc", _s3(), "strip"),
    }


PRESETS = _build_presets()


def get_preset(name, manifold=None) -> Preset:
    """Look up a preset; ``"uniform"`` needs a manifold (default S^2)."""
    if name.lower() == "uniform":
        spec = as_spec(manifold or "s2")
        return Preset("uniform", Uniform(spec), "cap")
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(PRESETS)} and uniform") from None


# -- regression models ---------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Component:
    kind: str  # "bsvm" or "vmf"
    params: dict  # arrays with one entry per covariate row


@dataclass(frozen=True, eq=False)
class RegressionModel:
    name: str
    covariates: CovariateSpace
    spec: ManifoldSpec
    region: str
    sample_x: Callable
    components: Callable  # X -> (weights, [Component, ...])

    def sample(self, n, seed=None):
        """Draw (X, Y) pairs; covariates first, then labels, then responses."""
        rng = np.random.default_rng(as_seed_sequence(seed))
        x = self.sample_x(int(n), rng)
        return x, self.sample_y(x, rng)

    def sample_y(self, x, rng):
        weights, comps = self.components(x)
        n = x.shape[0]
        lab = np.zeros(n, dtype=int)
        if len(comps) > 1:
            lab = np.minimum(np.searchsorted(np.cumsum(weights), rng.random(n), side="left"), len(comps) - 1)
        y = np.empty((n, self.spec.ambient_dim))
        for c, comp in enumerate(comps):
            sel = np.flatnonzero(lab == c)
            if sel.size:
                y[sel] = _draw(comp, sel, rng)
        return y

    def conditional(self, x) -> Distribution:
        """The conditional law of Y given a single covariate value."""
        x = self.covariates.as_rows(x)[:1]
        weights, comps = self.components(x)
        dists = [_as_distribution(c) for c in comps]
        return dists[0] if len(dists) == 1 else Mixture(weights, dists)


def _draw(comp, sel, rng):
    # "mu" of a vMF is a fixed direction; every other array holds one value per row
    p = {k: v if k == "mu" or np.ndim(v) == 0 else np.asarray(v)[sel] for k, v in comp.params.items()}
    if comp.kind == "bsvm":
        ang, _ = sample_bsvm_angles(p["mu1"], p["mu2"], p["k1"], p["k2"], p["lam"], sel.size, rng)
        return angles_to_points(ang)
    kappa = np.broadcast_to(p["kappa"], (sel.size,))
    return sample_vmf_array(p["mu"], kappa, rng)


def _scalar(v):
    return float(np.ravel(v)[0])


def _as_distribution(comp):
    p = comp.params
    if comp.kind == "bsvm":
        return BivariateSineVonMises(
            (_scalar(p["mu1"]), _scalar(p["mu2"])), (_scalar(p["k1"]), _scalar(p["k2"])), _scalar(p["lam"])
        )
    return VonMisesFisher(np.asarray(p["mu"], float), _scalar(p["kappa"]))


def _bsvm(mu, k1, k2, lam):
    return Component("bsvm", {"mu1": mu[0], "mu2": mu[1], "k1": k1, "k2": k2, "lam": lam})


def _vmf_x(mu, kappa):
    mu = np.asarray(mu, float)
    return lambda n, rng: sample_vmf_array(mu, np.full(n, kappa), rng)


def _uniform_x(lo, hi):
    return lambda n, rng: rng.uniform(lo, hi, size=(n, 1))


MU_X = (0.7, 0.7, np.sqrt(0.02))
S2X = CovariateSpace.on("s2")
S1X = CovariateSpace.on("s1")
R1 = CovariateSpace.euclidean(1)


def _abs_sum(x):
    return np.abs(x).sum(axis=1)


def _build_regression():
    ones = lambda x: np.ones(x.shape[0])  # noqa: E731

    def ts1(x):
        return (1.0,), [_bsvm((0, 0), np.exp(_abs_sum(x)), 2.0 * ones(x), 1.0 * ones(x))]

    def ts1s(x):
        return (1.0,), [_bsvm((0, 0), np.exp(3 * np.abs(x[:, 0])), np.exp(3 * np.abs(x[:, 1])), 1.0 * ones(x))]

    def ts1ss(x):
        lam = 10 * (np.abs(x[:, 0]) + np.abs(x[:, 1]))
        return (1.0,), [_bsvm((0, 0), 6.0 * ones(x), 6.0 * ones(x), lam)]

    def ts2(x):
        ks = [np.exp(2 * x[:, 0]), np.exp(2 * x[:, 1]), np.exp(_abs_sum(x))]
        return W3, [_bsvm(mu, k, k, lam * ones(x)) for (mu, lam), k in zip(BSVM3, ks)]

    def ts3(x):
        return (1.0,), [_bsvm((0, 0), np.exp(_abs_sum(x)), 0.0 * ones(x), 1.0 * ones(x))]

    def ts3s(x):
        gap = np.abs(x[:, 0] - x[:, 1])
        return (1.0,), [_bsvm((0, 0), 2 * gap, 0.0 * ones(x), np.exp(gap))]

    def ss1(x):
        return (1.0,), [Component("vmf", {"mu": NORTH, "kappa": 5 * np.exp(x[:, 0])})]

    def _ss2_like(kappas):
        return (0.3, 0.3, 0.4), [Component("vmf", {"mu": m, "kappa": k}) for m, k in zip(MIX3_MU, kappas)]

    def ss2(x):
        return _ss2_like([6 * np.exp(x[:, 0]), 4 * np.exp(2 * x[:, 1]), 2 * np.exp(3 * x[:, 0] + 2 * x[:, 1])])

    def ss2s(x):
        k = np.exp(np.abs(x[:, 1]) / (np.abs(x[:, 0]) + 0.25))
        return _ss2_like([k, k, k])

    def tr1(x):
        return (1.0,), [_bsvm((0, 0), 2.0 * ones(x), 2.0 * ones(x), x[:, 0] ** 2 - 9)]

    def tr2(x):
        return (1.0,), [_bsvm((0, 0), 2.0 * ones(x), 0.0 * ones(x), x[:, 0] ** 2 - 9)]

    def sr(x):
        k = (x[:, 0] - 5) ** 2
        return _ss2_like([k, k, k])

    def model(name, cov, spec, region, sx, comps):
        return RegressionModel(name, cov, spec, region, sx, comps)

    vmf1 = _vmf_x(MU_X, 1.0)
    vmf2 = _vmf_x(MU_X, 2.0)
    return {
        "TS1": model("TS1", S2X, T2, "cap", vmf1, ts1),
        "TS1*": model("TS1*", S2X, T2, "cap", vmf2, ts1s),
        "TS1**": model("TS1**", S2X, T2, "cap", _vmf_x((0.3, 0.3, np.sqrt(0.82)), 2.0), ts1ss),
        "TS2": model("TS2", S2X, T2, "cap", vmf1, ts2),
        "TS3": model("TS3", S2X, T2, "strip", vmf1, ts3),
        "TS3*": model("TS3*", S2X, T2, "strip", vmf1, ts3s),
        "SS1": model("SS1", S1X, S2, "cap", _vmf_x((0.0, 1.0), 3.0), ss1),
        "SS2": model("SS2", S1X, S2, "cap", _vmf_x((0.0, 1.0), 3.0), ss2),
        "SS2*": model("SS2*", S1X, S2, "cap", _vmf_x((0.0, 1.0), 3.0), ss2s),
        "TR1": model("TR1", R1, T2, "cap", _uniform_x(0.0, 5.0), tr1),
        "TR2": model("TR2", R1, T2, "strip", _uniform_x(0.0, 5.0), tr2),
        "SR": model("SR", R1, S2, "cap", _uniform_x(0.0, 5.0), sr),
    }


REGRESSION_PRESETS = _build_regression()


def get_regression_model(name) -> RegressionModel:
    try:
        return REGRESSION_PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown regression preset {name!r}; known: {', '.join(REGRESSION_PRESETS)}") from None
