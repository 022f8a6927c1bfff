"""Finite metric strategy spaces.

A :class:`StrategySpace` stands in for the compact strategy set: ``m``
points in ``R^n`` together with a validated distance matrix and quadrature
weights (cell volumes) used when a density is turned into a measure.

Points are ordered lexicographically over lattice indices for grids, and
every vector or matrix elsewhere in the package is indexed in that order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, MetricValidationError

TRIANGLE_TOL = 1e-12

# Spaces larger than this skip the O(m^3) triangle scan unless asked.
LARGE_SPACE = 2000


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StrategySpace:
    """Finite point set with a metric.

    Attributes
    ----------
    points : (m, n) array
        Strategy coordinates.
    dist : (m, m) array
        Pairwise distances.
    quad_weights : (m,) array
        Cell volumes; only used to convert densities to measures.
    """

    points: np.ndarray
    dist: np.ndarray
    quad_weights: np.ndarray
    labels: Optional[tuple] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(np.atleast_2d(self.points)))
        object.__setattr__(self, "dist", _frozen(self.dist))
        object.__setattr__(self, "quad_weights", _frozen(self.quad_weights))

    @property
    def m(self) -> int:
        return self.dist.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.m

    def name(self, i: int) -> str:
        if self.labels is not None:
            return str(self.labels[i])
        return f"{i}:{tuple(float(c) for c in self.points[i])}"

    def same_as(self, other: "StrategySpace") -> bool:
        if self is other:
            return True
        return self.m == other.m and np.array_equal(self.dist, other.dist)

    def __eq__(self, other):
        if not isinstance(other, StrategySpace):
            return NotImplemented
        return (
            self.same_as(other)
            and np.array_equal(self.points, other.points)
            and np.array_equal(self.quad_weights, other.quad_weights)
        )

    __hash__ = object.__hash__

    def to_dict(self) -> dict:
        return {
            "points": self.points.tolist(),
            "dist": self.dist.tolist(),
            "quad_weights": self.quad_weights.tolist(),
        }


@dataclass
class CheckOutcome:
    passed: bool
    counterexample: Optional[tuple] = None
    detail: str = ""


@dataclass
class MetricReport:
    """Per-invariant pass/fail with the first counterexample found."""

    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list:
        return [name for name, c in self.checks.items() if not c.passed]

    def __str__(self) -> str:
        lines = []
        for name, c in self.checks.items():
            status = "pass" if c.passed else "FAIL"
            extra = f" {c.detail}" if c.detail else ""
            lines.append(f"{name:16s} {status}{extra}")
        return "\n".join(lines)


def euclidean_dist(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def validate_metric(space: StrategySpace, tol: float = TRIANGLE_TOL) -> MetricReport:
    """Check every metric invariant of ``space`` and report all outcomes.

    Never raises; callers decide what to do with a failing report.
    """
    d = np.asarray(space.dist)
    checks = {}
    m = d.shape[0] if d.ndim == 2 else 0

    if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] < 1:
        checks["shape"] = CheckOutcome(False, None, f"dist has shape {d.shape}")
        return MetricReport(checks)
    checks["shape"] = CheckOutcome(True)
    if space.points.shape[0] != m:
        checks["points"] = CheckOutcome(
            False, None, f"{space.points.shape[0]} points but dist is {m}x{m}"
        )
    else:
        checks["points"] = CheckOutcome(True)

    if not np.all(np.isfinite(d)):
        i, j = map(int, np.argwhere(~np.isfinite(d))[0])
        checks["finite"] = CheckOutcome(False, (i, j), f"dist[{i}][{j}] = {d[i, j]}")
        return MetricReport(checks)

    neg = np.argwhere(d < 0)
    if len(neg):
        i, j = map(int, neg[0])
        checks["nonnegativity"] = CheckOutcome(False, (i, j), f"dist[{i}][{j}] = {d[i, j]}")
    else:
        checks["nonnegativity"] = CheckOutcome(True)

    diag = np.flatnonzero(np.diag(d) != 0)
    if len(diag):
        i = int(diag[0])
        checks["zero_diagonal"] = CheckOutcome(False, (i,), f"dist[{i}][{i}] = {d[i, i]}")
    else:
        checks["zero_diagonal"] = CheckOutcome(True)

    asym = np.argwhere(d != d.T)
    if len(asym):
        i, j = map(int, asym[0])
        checks["symmetry"] = CheckOutcome(
            False, (i, j), f"dist[{i}][{j}] = {d[i, j]} != dist[{j}][{i}] = {d[j, i]}"
        )
    else:
        checks["symmetry"] = CheckOutcome(True)

    off = ~np.eye(m, dtype=bool)
    coincide = np.argwhere(off & (d <= 0))
    if len(coincide):
        i, j = map(int, coincide[0])
        checks["distinct"] = CheckOutcome(False, (i, j), f"points {i} and {j} at distance {d[i, j]}")
    else:
        checks["distinct"] = CheckOutcome(True)

    triangle = CheckOutcome(True)
    for k in range(m):
        excess = d - (d[:, k][:, None] + d[k, :][None, :])
        bad = np.argwhere(excess > tol)
        if len(bad):
            i, j = map(int, bad[0])
            triangle = CheckOutcome(
                False,
                (i, k, j),
                f"d({i},{j}) = {d[i, j]} > d({i},{k}) + d({k},{j}) = {d[i, k] + d[k, j]}",
            )
            break
    checks["triangle"] = triangle

    w = np.asarray(space.quad_weights)
    if w.shape != (m,) or not np.all(w > 0):
        checks["quad_weights"] = CheckOutcome(False, None, "quad_weights must be m positive numbers")
    else:
        checks["quad_weights"] = CheckOutcome(True)
    return MetricReport(checks)


def _raise_on_failure(space: StrategySpace) -> None:
    report = validate_metric(space)
    if report.passed:
        return
    name = report.failures()[0]
    outcome = report.checks[name]
    if name == "triangle" and outcome.counterexample is not None:
        a, b, c = outcome.counterexample
        triple = ", ".join(space.name(i) for i in (a, b, c))
        raise MetricValidationError(
            f"triangle inequality violated for triple ({triple}): {outcome.detail}"
        )
    raise MetricValidationError(f"metric check '{name}' failed: {outcome.detail}")


def build_grid(lo: Sequence[float], hi: Sequence[float], counts: Sequence[int]) -> StrategySpace:
    """Regular rectangular lattice with the Euclidean metric.

    ``counts[k]`` points are placed along axis ``k`` with ``numpy.linspace``
    semantics (a single point sits at ``lo[k]``).  Quadrature weights are the
    uniform cell volume ``prod(hi - lo) / prod(counts)``.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    counts = np.atleast_1d(np.asarray(counts))
    if not (lo.ndim == hi.ndim == counts.ndim == 1) or not (len(lo) == len(hi) == len(counts)):
        raise ConfigError(
            f"dimension mismatch: lo has {lo.size}, hi has {hi.size}, counts has {counts.size} entries"
        )
    if len(lo) == 0:
        raise ConfigError("grid needs at least one dimension")
    if not np.all(lo < hi):
        raise ConfigError(f"need lo < hi componentwise, got lo={lo.tolist()}, hi={hi.tolist()}")
    if not np.all(np.equal(np.mod(counts, 1), 0)) or not np.all(counts >= 1):
        raise ConfigError(f"counts must be positive integers, got {counts.tolist()}")
    counts = counts.astype(int)

    axes = [np.linspace(a, b, c) for a, b, c in zip(lo, hi, counts)]
    points = np.array(list(itertools.product(*axes)), dtype=float)
    m = len(points)
    volume = float(np.prod(hi - lo)) / float(np.prod(counts))
    return StrategySpace(points, euclidean_dist(points), np.full(m, volume))


def build_explicit(
    points,
    metric: str = "euclidean",
    matrix=None,
    quad_weights=None,
    labels=None,
    validate: Optional[bool] = None,
) -> StrategySpace:
    """Space from an explicit point list.

    Parameters
    ----------
    points : sequence of coordinate vectors (or scalars for 1-D)
    metric : ``"euclidean"`` or ``"matrix"``
    matrix : explicit distance matrix when ``metric == "matrix"``
    validate : run the O(m^3) metric check; defaults to ``m <= 2000``

    Raises
    ------
    MetricValidationError
        if the metric axioms fail (the space is never repaired).
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ConfigError("need at least one point")
    m = pts.shape[0]
    if metric == "euclidean":
        dist = euclidean_dist(pts)
    elif metric in ("matrix", "explicit", "explicit-matrix"):
        if matrix is None:
            raise ConfigError("metric 'matrix' requires a distance matrix")
        dist = np.asarray(matrix, dtype=float)
        if dist.shape != (m, m):
            raise ConfigError(f"distance matrix has shape {dist.shape}, expected ({m}, {m})")
    else:
        raise ConfigError(f"unknown metric {metric!r}")
    if quad_weights is None:
        quad_weights = np.full(m, 1.0 / m)
    quad_weights = np.asarray(quad_weights, dtype=float)
    if quad_weights.shape != (m,):
        raise ConfigError(f"quad_weights has {quad_weights.size} entries, expected {m}")
    space = StrategySpace(pts, dist, quad_weights, tuple(labels) if labels is not None else None)
    if validate is None:
        validate = m <= LARGE_SPACE
    if validate:
        _raise_on_failure(space)
    return space
