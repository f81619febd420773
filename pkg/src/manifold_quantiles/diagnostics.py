"""Self-checks bundled behind ``manifold-quantiles check``.

Each check returns a :class:`CheckResult`; failures are report entries,
never exceptions.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import linprog

from .geometry import uniform_sample
from .quantiles import FrechetCap, fit_quantiles, latitude_profile
from .transport import check_cyclical_monotonicity, cost_matrix, solve_assignment, solve_kantorovich


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    def to_json(self):
        d = asdict(self)
        d["passed"] = bool(self.passed)
        d["measured"] = float(self.measured)
        return d


def brute_force_assignment(cost):
    """Minimum of sum_i cost[i, perm[i]] over all permutations."""
    n = cost.shape[0]
    rows = np.arange(n)
    return min(float(np.sum(cost[rows, list(p)])) for p in itertools.permutations(range(n)))


def lp_transport(cost, a, b):
    """Dense LP oracle for the transport problem (HiGHS)."""
    m, n = cost.shape
    eq = np.zeros((m + n, m * n))
    for i in range(m):
        eq[i, i * n:(i + 1) * n] = 1.0
    for j in range(n):
        eq[m + j, j::n] = 1.0
    res = linprog(cost.ravel(), A_eq=eq, b_eq=np.r_[a, b], bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return float(res.fun), res.x.reshape(m, n)


def check_assignment(seed=0, sizes=range(2, 7), trials=20, tol=1e-12):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for n in sizes:
        for _ in range(trials):
            y, z = uniform_sample("s2", n, rng), uniform_sample("s2", n, rng)
            c = cost_matrix("s2", y, z)
            worst = max(worst, abs(solve_assignment(c).objective - brute_force_assignment(c)))
    return CheckResult("assignment_vs_brute_force", worst <= tol, worst, tol)


def check_kantorovich(seed=0, trials=20, tol=1e-9):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        big_n, n = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        c = cost_matrix("s2", uniform_sample("s2", big_n, rng), uniform_sample("s2", n, rng))
        w = rng.dirichlet(np.ones(n))
        plan = solve_kantorovich(c, w)
        ref, _ = lp_transport(c, np.full(big_n, 1 / big_n), w)
        resid = max(np.abs(plan.row_sums() - 1 / big_n).max(), np.abs(plan.col_sums() - w).max())
        worst = max(worst, abs(plan.objective - ref), resid)
    return CheckResult("kantorovich_vs_lp", worst <= tol, worst, tol)


def monotonicity_result(spec, sources, targets, trials=1000, seed=0, tol=1e-9, name="cyclical_monotonicity"):
    rep = check_cyclical_monotonicity(spec, sources, targets, k_max=4, trials=trials, seed=seed)
    return CheckResult(name, rep.max_violation <= tol, rep.max_violation, tol, f"worst cycle {list(rep.worst_cycle)}")


def check_monotonicity(seed=0, n=50):
    rng = np.random.default_rng(seed)
    y, z = uniform_sample("s2", n, rng), uniform_sample("s2", n, rng)
    perm = solve_assignment(cost_matrix("s2", y, z)).perm
    return monotonicity_result("s2", y, z[perm], seed=seed)


def swapped_plan_fixture():
    """A deliberately suboptimal pairing: two points matched crosswise."""
    y = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    z = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
    return y, z


def check_latitude(tol=1e-9):
    taus = np.arange(1, 100) / 100
    err2 = max(abs(latitude_profile(2, t) - math.acos(1 - 2 * t) / math.pi) for t in taus)
    err1 = max(abs(latitude_profile(1, t) - t) for t in taus)
    half = max(abs(latitude_profile(p, 0.5) - 0.5) for p in range(1, 6))
    worst = max(err2, err1, half)
    return CheckResult("latitude_profile", worst <= tol, worst, tol, f"p=2 {err2:.2e}, p=1 {err1:.2e}, s(1/2) {half:.2e}")


def check_rank_counts(seed=0, n_0=5, n_R=10, n_S=50):
    from .presets import PRESETS

    bad = []
    for name, preset in PRESETS.items():
        y = preset.sample(n_0 + n_R * n_S, seed)
        fit = fit_quantiles(preset.spec, y, _rule(preset), n_R, n_S, n_0, seed=seed)
        counts = np.bincount(fit.ranks, minlength=n_R + 1)
        if counts[0] != n_0 or np.any(counts[1:] != n_S):
            bad.append(name)
    return CheckResult("rank_counts", not bad, float(len(bad)), 0.0, ",".join(bad))


def _rule(preset):
    from .quantiles import center_rule

    return FrechetCap() if preset.region == "cap" else center_rule("strip", preset.factor)


def run_checks(seed=0, rank_counts=True):
    checks = [check_assignment(seed), check_kantorovich(seed), check_monotonicity(seed), check_latitude()]
    if rank_counts:
        checks.append(check_rank_counts(seed))
    return checks
