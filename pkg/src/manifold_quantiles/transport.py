"""Exact discrete optimal transport for the cost c(y, z) = d(y, z)^2 / 2.

Two problems are solved:

* the balanced assignment between n sample points and n grid points
  (``solve_assignment``), backed by scipy's shortest augmenting path solver;
* the Kantorovich program between N uniformly weighted grid points and n
  weighted sample points (``solve_kantorovich``), backed by POT's network
  simplex. The dual potentials it returns are checked before a plan is
  handed back.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import as_spec, pairwise_distances

for _backend in ("TENSORFLOW", "PYTORCH", "JAX", "CUPY"):
    os.environ.setdefault(f"POT_BACKEND_DISABLE_{_backend}", "1")
import ot  # noqa: E402

MASS_TOL = 1e-9
DUAL_TOL = 1e-9


class TransportError(ValueError):
    pass


class InfeasibleMasses(TransportError):
    pass


def cost_matrix(spec, sources, targets):
    """Matrix of d^2/2 between the rows of ``sources`` and ``targets``."""
    return 0.5 * pairwise_distances(as_spec(spec), sources, targets, squared=True)


@dataclass(frozen=True)
class AssignmentPlan:
    perm: np.ndarray  # perm[i] = target index of source i
    objective: float

    def to_json(self):
        return {"perm": self.perm.tolist(), "objective": self.objective}


@dataclass(frozen=True)
class Coupling:
    """Sparse transport plan: ``mass[t]`` moves from row ``rows[t]`` to column ``cols[t]``."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple
    objective: float
    u: np.ndarray
    v: np.ndarray

    def dense(self):
        p = np.zeros(self.shape)
        np.add.at(p, (self.rows, self.cols), self.mass)
        return p

    def row_sums(self):
        return np.bincount(self.rows, self.mass, minlength=self.shape[0])

    def col_sums(self):
        return np.bincount(self.cols, self.mass, minlength=self.shape[1])

    @property
    def support_size(self):
        return int(self.mass.size)

    def to_json(self):
        return {
            "shape": list(self.shape),
            "objective": self.objective,
            "triples": [[int(i), int(j), float(m)] for i, j, m in zip(self.rows, self.cols, self.mass)],
        }


def _check_cost(cost, square=False):
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise TransportError("cost must be a matrix")
    if square and cost.shape[0] != cost.shape[1]:
        raise TransportError(f"assignment needs a square cost, got {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise TransportError("cost contains NaN or infinite entries")
    return cost


SIMPLEX_THRESHOLD = 300


def solve_assignment(cost, method="auto") -> AssignmentPlan:
    """Globally optimal permutation for a square cost matrix.

    ``method`` is ``"sap"`` (shortest augmenting path), ``"simplex"``
    (network simplex on unit integer masses, whose vertex optima are
    permutations) or ``"auto"``, which uses the simplex above
    ``SIMPLEX_THRESHOLD`` points. Augmenting paths get very long when a
    concentrated sample meets a uniform grid; the simplex does not care.
    """
    cost = _check_cost(cost, square=True)
    n = cost.shape[0]
    if method == "auto":
        method = "simplex" if n > SIMPLEX_THRESHOLD else "sap"
    perm = np.empty(n, dtype=np.int64)
    if method == "sap":
        rows, cols = linear_sum_assignment(cost)
        perm[rows] = cols
    elif method == "simplex":
        ones = np.ones(n)
        plan, info = ot.emd(ones, ones, np.ascontiguousarray(cost), numItermax=10**8, log=True)
        if info.get("result_code", 1) != 1:
            raise TransportError(f"network simplex stopped early: {info.get('warning')}")
        r, c = np.nonzero(plan > 0.5)
        if r.size != n or np.any(np.bincount(r, minlength=n) != 1):
            raise TransportError("network simplex returned a non-permutation vertex")
        perm[r] = c
    else:
        raise ValueError(f"unknown assignment method {method!r}")
    objective = float(np.sum(cost[np.arange(n), perm]))
    return AssignmentPlan(perm, objective)


def solve_kantorovich(cost, col_weights, row_weights=None) -> Coupling:
    """Optimal coupling with row masses ``row_weights`` (uniform 1/N by
    default) and column masses ``col_weights``.

    Zero-weight columns are removed before the solve and carry no mass.
    """
    cost = _check_cost(cost)
    n_rows, n_cols = cost.shape
    b = np.asarray(col_weights, dtype=float)
    a = np.full(n_rows, 1.0 / n_rows) if row_weights is None else np.asarray(row_weights, dtype=float)
    if b.shape != (n_cols,) or a.shape != (n_rows,):
        raise TransportError("mass vectors do not match the cost shape")
    if np.any(a < 0) or np.any(b < 0):
        raise InfeasibleMasses("masses must be nonnegative")
    if abs(a.sum() - 1.0) > MASS_TOL or abs(b.sum() - 1.0) > MASS_TOL:
        raise InfeasibleMasses(f"masses sum to {a.sum():.3g} and {b.sum():.3g}, expected 1")

    keep_r, keep_c = np.flatnonzero(a > 0), np.flatnonzero(b > 0)
    sub = np.ascontiguousarray(cost[np.ix_(keep_r, keep_c)])
    ar, bc = a[keep_r], b[keep_c]
    # renormalise away the tiny sum mismatch the solver would otherwise reject
    bc = bc * (ar.sum() / bc.sum())
    plan, info = ot.emd(ar, bc, sub, numItermax=10**8, log=True)
    if info.get("result_code", 1) != 1:
        raise TransportError(f"network simplex stopped early: {info.get('warning')}")

    r_loc, c_loc = np.nonzero(plan)
    mass = plan[r_loc, c_loc]
    u = np.full(n_rows, np.nan)
    v = np.full(n_cols, np.nan)
    u[keep_r], v[keep_c] = info["u"], info["v"]
    coupling = Coupling(
        rows=keep_r[r_loc],
        cols=keep_c[c_loc],
        mass=mass,
        shape=cost.shape,
        objective=float(np.sum(mass * sub[r_loc, c_loc])),
        u=u,
        v=v,
    )
    _certify(coupling, sub, ar, bc, info["u"], info["v"])
    return coupling


def _certify(coupling, sub, a, b, u, v):
    scale = 1.0 + float(np.max(np.abs(sub), initial=0.0))
    reduced = sub - u[:, None] - v[None, :]
    if reduced.min() < -DUAL_TOL * scale:
        raise TransportError(f"dual infeasible plan (reduced cost {reduced.min():.3g})")
    gap = abs(coupling.objective - (a @ u + b @ v))
    if gap > DUAL_TOL * (1.0 + abs(coupling.objective)):
        raise TransportError(f"duality gap {gap:.3g} too large")


def duality_gap(coupling: Coupling, col_weights, row_weights=None):
    a = np.full(coupling.shape[0], 1.0 / coupling.shape[0]) if row_weights is None else np.asarray(row_weights)
    b = np.asarray(col_weights, dtype=float)
    u, v = np.nan_to_num(coupling.u), np.nan_to_num(coupling.v)
    return abs(coupling.objective - (a @ u + b @ v))


@dataclass(frozen=True)
class MonotonicityReport:
    max_violation: float
    trials: int
    worst_cycle: tuple

    @property
    def ok(self):
        return self.max_violation <= 1e-9


def check_cyclical_monotonicity(spec, sources, targets, k_max=4, trials=1000, seed=None) -> MonotonicityReport:
    """Sample cycles on the support pairs (sources[i], targets[i]).

    For a subset i_1..i_k and a cyclic shift s, the violation is
    sum c(y_i, z_i) - sum c(y_{i+s}, z_i). Optimal plans keep it <= 0 up
    to rounding.
    """
    spec = as_spec(spec)
    y = np.atleast_2d(spec.check(sources))
    z = np.atleast_2d(spec.check(targets))
    m = y.shape[0]
    if m < 2 or k_max < 2:
        return MonotonicityReport(0.0, 0, ())
    rng = np.random.default_rng(seed)
    worst, worst_cycle = 0.0, ()
    for _ in range(int(trials)):
        k = int(rng.integers(2, min(k_max, m) + 1))
        idx = rng.choice(m, size=k, replace=False)
        shift = int(rng.integers(1, k))
        c = cost_matrix(spec, y[idx], z[idx])
        now = np.trace(c)
        moved = np.sum(c[np.roll(np.arange(k), -shift), np.arange(k)])
        viol = float(now - moved)
        if viol > worst:
            worst, worst_cycle = viol, tuple(int(i) for i in idx[np.roll(np.arange(k), -shift)])
    return MonotonicityReport(worst, int(trials), worst_cycle)
