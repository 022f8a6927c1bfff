import itertools
import math

import numpy as np
import pytest

from blgame.errors import ConfigError, MetricValidationError
from blgame.space import StrategySpace, build_explicit, build_grid, validate_metric


def test_two_point_lattice():
    s = build_grid([0], [1], [2])
    assert s.points[:, 0].tolist() == [0.0, 1.0]
    assert s.dist[0, 1] == 1.0
    assert s.quad_weights.tolist() == [0.5, 0.5]  # box volume / number of points


def test_singleton_grid():
    s = build_grid([0], [1], [1])
    assert s.m == 1
    assert s.dist.tolist() == [[0.0]]


def test_5x5_grid_diameter():
    s = build_grid([0.5, 0.5], [1.5, 1.5], [5, 5])
    assert s.m == 25
    # exhaustive pair scan
    diam = max(math.dist(a, b) for a, b in itertools.combinations(s.points.tolist(), 2))
    assert diam == pytest.approx(math.sqrt(2), abs=1e-15)
    assert s.dist.max() == pytest.approx(math.sqrt(2), abs=1e-15)
    assert np.allclose(s.quad_weights, 1 / 25)


def test_grid_order_is_lexicographic():
    s = build_grid([0, 0], [1, 2], [2, 3])
    assert s.points.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]


@pytest.mark.parametrize(
    "lo, hi, counts",
    [([0, 0], [1], [2, 2]), ([0], [1], [2, 2]), ([1], [1], [2]), ([0], [1], [0])],
)
def test_grid_rejects_bad_input(lo, hi, counts):
    with pytest.raises(ConfigError):
        build_grid(lo, hi, counts)


def test_explicit_matrix_valid():
    s = build_explicit([[0.0], [1.0]], metric="explicit-matrix", matrix=[[0, 3], [3, 0]])
    assert s.dist[0, 1] == 3.0
    assert validate_metric(s).passed


def test_triangle_violation_names_triple():
    with pytest.raises(MetricValidationError) as exc:
        build_explicit(
            [[0.0], [1.0], [2.0]],
            metric="explicit-matrix",
            matrix=[[0, 1, 10], [1, 0, 1], [10, 1, 0]],
            labels=["a", "b", "c"],
        )
    msg = str(exc.value)
    assert "triangle" in msg
    assert "a" in msg and "b" in msg and "c" in msg


def test_explicit_euclidean_matches_grid():
    g = build_grid([0.5, 0.5], [1.5, 1.5], [5, 5])
    e = build_explicit(g.points)
    assert np.array_equal(g.dist, e.dist)
    assert g == e


def _raw(dist):
    m = len(dist)
    return StrategySpace(np.zeros((m, 1)), np.asarray(dist, dtype=float), np.ones(m))


def test_report_symmetry_failure():
    rep = validate_metric(_raw([[0, 1], [2, 0]]))
    assert not rep.checks["symmetry"].passed
    assert rep.checks["symmetry"].counterexample is not None


def test_report_negative_entry():
    rep = validate_metric(_raw([[0, -1], [-1, 0]]))
    assert not rep.checks["nonnegativity"].passed


def test_report_passes_for_grid():
    rep = validate_metric(build_grid([0, 0, 0], [1, 1, 1], [3, 3, 2]))
    assert rep.passed
    assert rep.failures() == []


def test_arrays_are_read_only():
    s = build_grid([0], [1], [3])
    with pytest.raises(ValueError):
        s.dist[0, 1] = 5.0
