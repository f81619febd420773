import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import betaincinv
from scipy.stats import special_ortho_group

from manifold_quantiles.distributions import BivariateSineVonMises, VonMisesFisher
from manifold_quantiles.geometry import (
    ManifoldSpec,
    angles_to_points,
    exp_map,
    geodesic_distance,
    pairwise_distances,
    points_to_angles,
    uniform_sample,
)
from manifold_quantiles.presets import PRESETS
from manifold_quantiles.quantiles import (
    Cap,
    ContourRangeError,
    DuplicatePoints,
    FactorCap,
    FixedCenter,
    FrechetCap,
    FrechetFactorCap,
    FrechetStrip,
    GridError,
    GridMode,
    Strip,
    TorusEquator,
    build_grid,
    cap_content,
    center_from_json,
    center_rule,
    contour_level,
    extract_contour,
    extract_region,
    fit_quantiles,
    frechet_mean,
    frechet_objective,
    grid_seeds,
    hausdorff_distance,
    latitude_profile,
)
from manifold_quantiles.transport import solve_assignment

NORTH = np.array([0.0, 0.0, 1.0])
S2, T2 = ManifoldSpec((2,)), ManifoldSpec((1, 1))


def s_oracle(p, tau):
    # cap content on S^p is I_{sin^2(pi s / 2)}(p/2, p/2)
    return 2 / math.pi * math.asin(math.sqrt(betaincinv(p / 2, p / 2, tau)))


# -- latitude profile ----------------------------------------------------------

def test_latitude_examples():
    assert latitude_profile(2, 0.25) == pytest.approx(1 / 3, abs=1e-9)
    for p in range(1, 6):
        assert latitude_profile(p, 0.5) == pytest.approx(0.5, abs=1e-10)
    for t in np.linspace(0, 1, 11):
        assert latitude_profile(1, t) == pytest.approx(t, abs=1e-12)


@pytest.mark.parametrize("p", [2, 3, 4, 6])
def test_latitude_matches_incomplete_beta(p):
    for tau in (0.01, 0.1, 0.37, 0.5, 0.8, 0.99):
        assert latitude_profile(p, tau) == pytest.approx(s_oracle(p, tau), abs=1e-10)


def test_latitude_rejects_bad_tau():
    with pytest.raises(ValueError):
        latitude_profile(2, 1.5)
    with pytest.raises(ValueError):
        latitude_profile(2, -0.1)


@settings(max_examples=30)
@given(st.integers(1, 5), st.floats(0.001, 0.998), st.floats(1e-4, 1e-3))
def test_latitude_increasing_and_consistent(p, tau, step):
    a, b = latitude_profile(p, tau), latitude_profile(p, tau + step)
    assert a < b
    assert abs(cap_content(p, a) - tau) < 1e-10


# -- Fréchet mean --------------------------------------------------------------

def test_frechet_single_point():
    y = uniform_sample(S2, 1, 3)
    assert np.allclose(frechet_mean(S2, y), y[0])


def test_frechet_midpoint():
    y = np.array([[1.0, 0.0, 0.0], [math.cos(1.2), math.sin(1.2), 0.0]])
    m = frechet_mean(S2, y)
    assert np.allclose(m, [math.cos(0.6), math.sin(0.6), 0.0], atol=1e-8)


def test_frechet_weighted_ratio():
    y = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    m = frechet_mean(S2, y, np.array([0.25, 0.75]))
    # along the geodesic the objective is 0.25 t^2 + 0.75 (pi/2 - t)^2, minimized at t = 3 pi / 8
    assert np.allclose(m, [math.cos(3 * math.pi / 8), math.sin(3 * math.pi / 8), 0.0], atol=1e-8)


def test_frechet_degenerate_weight():
    y = uniform_sample(S2, 5, 1)
    assert np.allclose(frechet_mean(S2, y, np.array([0, 0, 1.0, 0, 0])), y[2])


def test_frechet_vmf_concentration():
    y = VonMisesFisher(NORTH, 10.0).sample(200, 0)
    assert geodesic_distance(S2, frechet_mean(S2, y), NORTH) < 0.1


def test_frechet_errors():
    with pytest.raises(ValueError):
        frechet_mean(S2, np.empty((0, 3)))
    with pytest.raises(ValueError):
        frechet_mean(S2, uniform_sample(S2, 3, 0), np.zeros(3))


@settings(max_examples=25)
@given(st.sampled_from([S2, T2, ManifoldSpec((1, 2))]), st.integers(0, 2**31))
def test_frechet_beats_every_sample_point(spec, seed):
    y = uniform_sample(spec, 30, seed)
    w = np.full(30, 1 / 30)
    m = frechet_mean(spec, y, w)
    at_points = [frechet_objective(spec, y, w, yi) for yi in y]
    assert frechet_objective(spec, y, w, m) <= min(at_points) + 1e-12


# -- grids ---------------------------------------------------------------------

def test_sphere_cap_ring_latitudes():
    g = build_grid(S2, Cap(NORTH), 3, 40, 1, seed=0)
    assert g.n == 121 and np.array_equal(np.bincount(g.ring), [1, 40, 40, 40])
    for r in (1, 2, 3):
        lat = geodesic_distance(S2, g.points[g.ring == r], NORTH)
        assert np.allclose(lat, math.pi * latitude_profile(2, r / 4), atol=1e-12)


def test_torus_cap_chebyshev_radius():
    g = build_grid(T2, Cap(angles_to_points([0.0, 0.0])), 3, 40, 1, seed=0)
    ang = points_to_angles(g.points[g.ring == 2])
    assert np.allclose(np.abs(ang).max(axis=1), math.pi * math.sqrt(2 / 4), atol=1e-9)


def centers_for(spec, rng):
    pt = uniform_sample(spec, 1, rng)[0]
    out = []
    if spec.k == 1 or spec.is_torus:
        out.append(Cap(pt))
    for j, p in enumerate(spec.factors):
        if p == 1:
            out.append(TorusEquator(j, float(rng.uniform(-math.pi, math.pi))))
        else:
            out.append(Strip(j, pt))
        if spec.k > 1:
            out.append(FactorCap(j, pt))
    return out


GRID_SPECS = [S2, ManifoldSpec((3,)), T2, ManifoldSpec((1, 1, 1)), ManifoldSpec((1, 2)), ManifoldSpec((2, 2))]


@settings(max_examples=40)
@given(st.sampled_from(GRID_SPECS), st.integers(0, 2**31), st.integers(1, 5), st.integers(1, 4),
       st.sampled_from(list(GridMode)))
def test_grid_levels_and_counts(spec, seed, n_R, half_S, mode):
    rng = np.random.default_rng(seed)
    n_S = 2 * half_S
    for center in centers_for(spec, rng):
        m = build_grid(spec, center, n_R, n_S, 1, seed=0).mode  # default
        try:
            g = build_grid(spec, center, n_R, n_S, 2, seed=seed, mode=mode)
        except GridError:
            assert mode is GridMode.EQUISPACED and m is GridMode.IID
            continue
        assert g.n == 2 + n_R * n_S
        assert np.array_equal(np.bincount(g.ring), [2] + [n_S] * n_R)
        assert spec.is_point(g.points, tol=1e-12)
        lev = contour_level(spec, center, g.points)
        assert np.allclose(lev, g.ring / (n_R + 1), atol=1e-9)
        rec = exp_map(spec, g.base, g.arc[:, None] * g.direction)
        assert np.allclose(geodesic_distance(spec, rec, g.points), 0, atol=1e-7)
        nz = g.ring > 0
        assert np.allclose(np.linalg.norm(g.direction[nz], axis=1), 1, atol=1e-10)
        if mode is GridMode.FIBERED:
            assert np.array_equal(g.fiber[nz], np.tile(np.arange(n_S), n_R))


def test_grid_errors():
    with pytest.raises(GridError):
        build_grid(S2, Cap(NORTH), 2, 3, 0)
    with pytest.raises(GridError):
        build_grid(ManifoldSpec((3,)), Cap(np.array([0, 0, 0, 1.0])), 2, 3, 1, mode="equispaced")
    with pytest.raises(GridError):
        build_grid(S2, Strip(0, NORTH), 2, 3, 1)
    with pytest.raises(GridError):
        build_grid(ManifoldSpec((1, 2)), Cap(uniform_sample("s1xs2", 1, 0)[0]), 2, 4, 1)
    with pytest.raises(GridError):
        build_grid(S2, TorusEquator(0, 0.0), 2, 4, 1)


def test_center_json_round_trip():
    for c in centers_for(ManifoldSpec((1, 2)), np.random.default_rng(0)) + [Cap(NORTH), Strip(0, NORTH)]:
        back = center_from_json(c.to_json())
        assert type(back) is type(c) and back.to_json() == c.to_json()


@pytest.mark.slow
def test_grid_close_to_uniform():
    # the bounded-Lipschitz distance is at most W1, computed exactly here
    g = build_grid(S2, Cap(NORTH), 100, 100, 1, seed=0)
    u = uniform_sample(S2, g.n, 1)
    w1 = solve_assignment(pairwise_distances(S2, g.points, u)).objective / g.n
    assert w1 < 0.05


# -- fits ----------------------------------------------------------------------

def rule_for(preset):
    return FrechetCap() if preset.region == "cap" else FrechetStrip(preset.factor)


@settings(max_examples=20)
@given(st.sampled_from(sorted(PRESETS)), st.integers(0, 2**31), st.integers(1, 3), st.integers(1, 4),
       st.integers(1, 4))
def test_rank_counts(name, seed, n_0, n_R, half_S):
    preset = PRESETS[name]
    n_S = 2 * half_S
    y = preset.sample(n_0 + n_R * n_S, seed)
    fit = fit_quantiles(preset.spec, y, rule_for(preset), n_R, n_S, n_0, seed=seed)
    assert np.array_equal(np.bincount(fit.ranks, minlength=n_R + 1), [n_0] + [n_S] * n_R)
    assert np.array_equal(np.sort(fit.perm), np.arange(y.shape[0]))
    assert np.array_equal(fit.ranks, fit.grid.ring[fit.perm])
    norms = np.linalg.norm(fit.signs, axis=1)
    assert np.allclose(norms[fit.ranks > 0], 1, atol=1e-10)
    assert np.all(norms[fit.ranks == 0] == 0)
    for r in range(n_R + 1):
        assert len(fit.region(r)) == n_0 + r * n_S
        assert set(fit.region_indices(r)) <= set(fit.region_indices(min(r + 1, n_R)))
    assert np.array_equal(fit.region(n_R), y)


def test_fit_recovers_its_own_grid():
    center = Cap(NORTH)
    g = build_grid(S2, center, 4, 6, 1, seed=grid_seeds(11)[1])
    fit = fit_quantiles(S2, g.points, FixedCenter(center), 4, 6, 1, seed=11)
    assert np.array_equal(fit.perm, np.arange(g.n))
    assert np.array_equal(fit.ranks, g.ring)
    assert fit.objective == pytest.approx(0.0, abs=1e-20)


def test_fit_center_copies_in_index_order():
    y = VonMisesFisher(NORTH, 5.0).sample(5 + 2 * 4, 0)
    fit = fit_quantiles(S2, y, FrechetCap(), 2, 4, 5, seed=0)
    hits = np.flatnonzero(fit.ranks == 0)
    assert np.array_equal(fit.perm[hits], np.sort(fit.perm[hits]))


def test_fit_errors():
    y = uniform_sample(S2, 9, 0)
    with pytest.raises(GridError):
        fit_quantiles(S2, y, FrechetCap(), 2, 3, 1)
    y[3] = y[5]
    with pytest.raises(DuplicatePoints):
        fit_quantiles(S2, y, FrechetCap(), 2, 4, 1)
    fit = fit_quantiles(S2, uniform_sample(S2, 9, 0), FrechetCap(), 2, 4, 1)
    with pytest.raises(ContourRangeError):
        extract_contour(fit, 3)
    with pytest.raises(ContourRangeError):
        extract_region(fit, -1)
    fit0 = fit_quantiles(T2, uniform_sample(T2, 8, 0), FrechetStrip(0), 2, 4, 0)
    with pytest.raises(ContourRangeError):
        fit0.contour(0)


def test_center_rules():
    assert isinstance(center_rule("cap"), FrechetCap)
    assert center_rule("strip", 1) == FrechetStrip(1)
    assert isinstance(center_rule("factor-cap"), FrechetFactorCap)
    with pytest.raises(ValueError):
        center_rule("band")
    y = BivariateSineVonMises((1.5, 0), (3, 0), 0).sample(1 + 3 * 4, 0)
    fit = fit_quantiles(T2, y, FrechetStrip(0), 3, 4, 1, seed=0)
    assert isinstance(fit.center, TorusEquator)
    fit = fit_quantiles("s1xs2", uniform_sample("s1xs2", 9, 0), FrechetFactorCap(1), 2, 4, 1, seed=0)
    assert isinstance(fit.center, FactorCap) and fit.center.factor == 1


def test_fit_deterministic():
    y = PRESETS["T2"].sample(41, 1)
    a = fit_quantiles(T2, y, FrechetCap(), 4, 10, 1, seed=5)
    b = fit_quantiles(T2, y, FrechetCap(), 4, 10, 1, seed=5)
    assert np.array_equal(a.perm, b.perm) and np.array_equal(a.signs, b.signs)


@settings(max_examples=15)
@given(st.integers(2, 3), st.integers(0, 2**31))
def test_orthogonal_equivariance(p, seed):
    spec = ManifoldSpec((p,))
    rng = np.random.default_rng(seed)
    pole = uniform_sample(spec, 1, rng)[0]
    y = uniform_sample(spec, 1 + 3 * 6, rng)
    rot = special_ortho_group.rvs(p + 1, random_state=seed % 2**31)
    frame = np.linalg.qr(np.column_stack([pole, rng.standard_normal((p + 1, p))]))[0][:, 1:]
    a = fit_quantiles(spec, y, FixedCenter(Cap(pole, frame)), 3, 6, 1, seed=seed)
    b = fit_quantiles(spec, y @ rot.T, FixedCenter(Cap(rot @ pole, rot @ frame)), 3, 6, 1, seed=seed)
    assert np.array_equal(a.ranks, b.ranks)
    assert np.allclose(a.signs @ rot.T, b.signs, atol=1e-9)


def test_sign_rank_independence_fibered():
    # n_0 = 0 with shared fibers: ring and fiber of observation 1 are independent
    center = FixedCenter(TorusEquator(0, 0.0))
    dist = BivariateSineVonMises((0, 0), (2, 1), 1.0)
    joint = np.zeros((3, 4))
    for seed in range(2000):
        y = dist.sample(12, seed)
        fit = fit_quantiles(T2, y, center, 3, 4, 0, seed=seed, grid_mode="fibered")
        g = fit.perm[0]
        joint[fit.grid.ring[g] - 1, fit.grid.fiber[g]] += 1
    pj = joint / joint.sum()
    indep = pj.sum(1, keepdims=True) * pj.sum(0, keepdims=True)
    mi = float(np.sum(np.where(pj > 0, pj * np.log(pj / indep), 0.0)))
    assert mi < 0.02


# -- Hausdorff -----------------------------------------------------------------

def test_hausdorff_examples():
    a = uniform_sample(S2, 20, 0)
    assert hausdorff_distance(S2, a, a) == 0.0
    assert hausdorff_distance(S2, a[:1], a[1:2]) == pytest.approx(float(geodesic_distance(S2, a[0], a[1])))
    t = np.linspace(0, 2 * math.pi, 50, endpoint=False)
    equator = np.column_stack([np.cos(t), np.sin(t), np.zeros_like(t)])
    assert hausdorff_distance(S2, NORTH[None], equator) == pytest.approx(math.pi / 2, abs=1e-15)
    with pytest.raises(ValueError):
        hausdorff_distance(S2, a[:0], a)


@settings(max_examples=30)
@given(st.integers(0, 2**31))
def test_hausdorff_symmetric(seed):
    rng = np.random.default_rng(seed)
    a, b = uniform_sample(T2, 7, rng), uniform_sample(T2, 4, rng)
    assert hausdorff_distance(T2, a, b) == hausdorff_distance(T2, b, a)
    assert hausdorff_distance(T2, a, np.vstack([a, a[:2]])) == 0.0
