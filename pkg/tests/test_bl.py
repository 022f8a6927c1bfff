import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from blgame import simplex
from blgame.bl import (
    BLFunction,
    DiscreteMeasure,
    MutationKernel,
    bl_norms,
    bullet,
    certify_kernel_lip,
    diagonal_family,
    flat_distance,
    flat_norm,
    flat_norm_solution,
    function_bullet,
    kernel_sup_norm,
    kernel_sup_norm_dist,
    make_pure_selection,
    make_smoothed_kernel,
    pair,
)
from blgame.errors import ConfigError, DimensionError
from blgame.oracle import flat_norm_oracle
from blgame.space import build_explicit, build_grid

# Frozen reference values, computed with scipy's HiGHS on the same LP and
# confirmed by the brute-force vertex oracle.
DIRAC_PAIR = {0.5: 0.4, 1.0: 2.0 / 3.0, 3.0: 1.2}
LINE_1_M2_1 = 4.0 / 3.0  # weights (1, -2, 1) at 0, 1, 2
SQUARE_MIXED = 0.6833333333333333  # weights (0.5, -1, 0.25, 0.3) on the unit square corners


def linprog_flat_norm(w, d):
    """Flat norm via scipy, variables (g, s, L), as an independent reference."""
    m = len(w)
    rows, rhs = [], []
    for i in range(m):
        for sign in (1, -1):
            r = np.zeros(m + 2)
            r[i], r[m] = sign, -1
            rows.append(r)
            rhs.append(0)
    for i, j in itertools.permutations(range(m), 2):
        r = np.zeros(m + 2)
        r[i], r[j], r[m + 1] = 1, -1, -d[i, j]
        rows.append(r)
        rhs.append(0)
    r = np.zeros(m + 2)
    r[m] = r[m + 1] = 1
    rows.append(r)
    rhs.append(1)
    c = np.concatenate([-np.asarray(w, float), [0, 0]])
    res = linprog(c, A_ub=np.array(rows), b_ub=rhs, bounds=[(None, None)] * m + [(0, None)] * 2, method="highs")
    return -res.fun


def line(*xs):
    return build_explicit([[x] for x in xs])


# ---------------------------------------------------------------------------
# functions and pairing


def test_bl_norms_constant_and_zero():
    s = line(0, 1, 3)
    assert tuple(bl_norms(BLFunction.constant(s))) == (1.0, 0.0, 1.0)
    assert tuple(bl_norms(BLFunction.constant(s, 0.0))) == (0.0, 0.0, 0.0)


def test_bl_norms_identity_on_two_points():
    s = line(0, 1)
    assert tuple(bl_norms(BLFunction([0.0, 1.0], s))) == (1.0, 1.0, 2.0)


def test_pair_dirac_and_mass():
    s = line(0, 1)
    g = BLFunction([7.0, -2.0], s)
    assert pair(DiscreteMeasure.dirac(s, 0), g) == 7.0
    assert pair(DiscreteMeasure([2.0, 3.0], s), BLFunction.constant(s)) == 5.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pair_bilinear(seed):
    rng = np.random.default_rng(seed)
    s = line(*range(4))
    mu, nu = (DiscreteMeasure(rng.normal(size=4), s) for _ in range(2))
    g = BLFunction(rng.normal(size=4), s)
    a = rng.normal()
    assert pair(mu * a + nu, g) == pytest.approx(a * pair(mu, g) + pair(nu, g), abs=1e-12)


def test_space_mismatch():
    with pytest.raises(DimensionError):
        pair(DiscreteMeasure([1.0, 2.0], line(0, 1)), BLFunction([1.0, 2.0], line(0, 2)))
    with pytest.raises(DimensionError):
        DiscreteMeasure([1.0], line(0, 1))


# ---------------------------------------------------------------------------
# flat norm


def test_flat_norm_positive_is_mass():
    assert flat_norm(DiscreteMeasure([2.0, 3.0], line(0, 1))) == pytest.approx(5.0, abs=1e-12)


def test_flat_norm_zero_and_dirac():
    s = line(0, 1)
    assert flat_norm(DiscreteMeasure.zero(s)) == 0.0
    assert flat_norm(DiscreteMeasure.dirac(s, 1)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", sorted(DIRAC_PAIR))
def test_dirac_difference(d):
    mu = DiscreteMeasure([1.0, -1.0], line(0, d))
    assert flat_norm(mu) == pytest.approx(DIRAC_PAIR[d], abs=1e-12)
    assert flat_norm_oracle(mu) == pytest.approx(DIRAC_PAIR[d], abs=1e-9)


def test_frozen_multi_point_values():
    assert flat_norm(DiscreteMeasure([1.0, -2.0, 1.0], line(0, 1, 2))) == pytest.approx(LINE_1_M2_1, abs=1e-12)
    sq = build_grid([0, 0], [1, 1], [2, 2])
    w = np.array([0.5, -1.0, 0.25, 0.3])
    # grid order is (0,0), (0,1), (1,0), (1,1); reference used (0,0), (1,0), (0,1), (1,1)
    mu = DiscreteMeasure(w[[0, 2, 1, 3]], sq)
    assert flat_norm(mu) == pytest.approx(SQUARE_MIXED, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 7))
def test_flat_norm_matches_linprog(seed, m):
    rng = np.random.default_rng(seed)
    s = build_explicit(rng.uniform(0, 2, size=(m, 2)), validate=False)
    w = rng.normal(size=m) * (rng.uniform(size=m) < 0.7)
    assert flat_norm(DiscreteMeasure(w, s)) == pytest.approx(linprog_flat_norm(w, s.dist), abs=1e-9)


def test_maximizer_is_admissible():
    rng = np.random.default_rng(7)
    s = build_explicit(rng.uniform(size=(6, 2)))
    mu = DiscreteMeasure(rng.normal(size=6), s)
    sol = flat_norm_solution(mu)
    assert np.all(np.abs(sol.g) <= sol.s + 1e-12)
    assert sol.s + sol.L <= 1 + 1e-12
    lip = np.abs(sol.g[:, None] - sol.g[None]) - sol.L * s.dist
    assert lip.max() <= 1e-12
    assert pair(mu, BLFunction(sol.g, s)) == pytest.approx(sol.value, abs=1e-12)


def test_flat_distance_properties():
    rng = np.random.default_rng(3)
    s = build_explicit(rng.uniform(size=(5, 2)))
    mu, nu, xi = (DiscreteMeasure(rng.normal(size=5), s) for _ in range(3))
    assert flat_distance(mu, mu) == 0.0
    assert flat_distance(mu, xi) <= flat_distance(mu, nu) + flat_distance(nu, xi) + 1e-12
    x, y = DiscreteMeasure.dirac(s, 0), DiscreteMeasure.dirac(s, 3)
    assert flat_distance(x, y) == flat_norm(x - y)


def test_simplex_small_problem():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6
    res = simplex.maximize([1, 1], [[1, 2], [3, 1]], [4, 6])
    assert res.value == pytest.approx(2.8)
    assert res.x == pytest.approx([1.6, 1.2])


def test_oracle_limits_support():
    with pytest.raises(ConfigError):
        flat_norm_oracle(DiscreteMeasure(np.ones(4), line(0, 1, 2, 3)))


# ---------------------------------------------------------------------------
# bullet action and kernels


def test_pure_selection_is_identity():
    s = line(0, 1, 2)
    mu = DiscreteMeasure([1.0, -2.0, 0.5], s)
    assert np.array_equal(bullet(make_pure_selection(s), mu).weights, mu.weights)


def test_bullet_of_dirac_is_column():
    rng = np.random.default_rng(0)
    s = line(0, 1, 2)
    gamma = MutationKernel(rng.dirichlet(np.ones(3), size=3).T, s)
    assert np.array_equal(bullet(gamma, DiscreteMeasure.dirac(s, 1)).weights, gamma.columns[:, 1])


def test_bullet_duality():
    rng = np.random.default_rng(1)
    s = line(0, 1, 2, 4)
    gamma = MutationKernel(rng.dirichlet(np.ones(4), size=4).T, s)
    mu = DiscreteMeasure(rng.normal(size=4), s)
    g = BLFunction(rng.normal(size=4), s)
    pushed = np.array([pair(gamma.column(j), g) for j in range(4)])
    assert pair(bullet(gamma, mu), g) == pytest.approx(pair(mu, BLFunction(pushed, s)), abs=1e-12)


def test_function_bullet():
    rng = np.random.default_rng(2)
    s = line(0, 1, 2)
    mu = DiscreteMeasure(rng.normal(size=3), s)
    f, g = BLFunction(rng.normal(size=3), s), BLFunction(rng.normal(size=3), s)
    assert np.array_equal(function_bullet(BLFunction.constant(s), mu).weights, mu.weights)
    assert not np.any(function_bullet(BLFunction.constant(s, 0.0), mu).weights)
    assert pair(function_bullet(f, mu), g) == pytest.approx(pair(mu, f * g), abs=1e-12)
    assert np.allclose(bullet(diagonal_family(f), mu).weights, function_bullet(f, mu).weights)


def test_kernel_validation():
    s = line(0, 1)
    with pytest.raises(ConfigError, match="column 1 sums to 0.9"):
        MutationKernel([[1.0, 0.4], [0.0, 0.5]], s)
    with pytest.raises(ConfigError, match="negative"):
        MutationKernel([[1.2, 0.0], [-0.2, 1.0]], s)
    assert MutationKernel([[1.0, 0.4], [0.0, 0.5]], s, validate=False).columns[1, 1] == 0.5


def test_kernel_sup_norm_dist():
    s = line(0, 1)
    pure = make_pure_selection(s)
    shifted = MutationKernel([[0.0, 1.0], [1.0, 0.0]], s)
    assert kernel_sup_norm_dist(pure, pure) == 0.0
    assert kernel_sup_norm_dist(pure, MutationKernel(pure.columns.copy(), s)) == 0.0
    assert kernel_sup_norm_dist(pure, shifted) == pytest.approx(DIRAC_PAIR[1.0], abs=1e-12)


def test_certify_lip():
    s = line(0, 1)
    assert certify_kernel_lip(MutationKernel([[0.3, 0.3], [0.7, 0.7]], s)).lip_bound == 0.0
    assert certify_kernel_lip(make_pure_selection(s)).lip_bound == pytest.approx(DIRAC_PAIR[1.0], abs=1e-12)


def test_smoothed_kernel():
    s = build_grid([0, 0], [1, 1], [4, 4])
    k = make_smoothed_kernel(s, 0.4)
    assert np.allclose(k.columns.sum(axis=0), 1.0, atol=1e-12, rtol=0)
    narrow = make_smoothed_kernel(s, 1e-3)
    assert kernel_sup_norm_dist(narrow, make_pure_selection(s)) < 1e-12
    single = build_grid([0], [1], [1])
    assert make_smoothed_kernel(single, 0.7).columns.tolist() == [[1.0]]
    with pytest.raises(ConfigError):
        make_smoothed_kernel(s, 0.0)


def test_kernel_sup_norm_positive_kernel_is_one():
    rng = np.random.default_rng(4)
    s = build_explicit(rng.uniform(size=(5, 2)))
    gamma = MutationKernel(rng.dirichlet(np.ones(5), size=5).T, s)
    assert kernel_sup_norm(gamma) == pytest.approx(1.0, abs=1e-12)
