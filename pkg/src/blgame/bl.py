"""Bounded-Lipschitz functions, signed measures and mutation kernels.

Everything lives on a finite :class:`~blgame.space.StrategySpace` with
``m`` points:

* :class:`BLFunction` -- a test function ``g``, stored as its values.
* :class:`DiscreteMeasure` -- a signed measure, stored as dense weights.
* :class:`MutationKernel` -- a family ``q -> gamma(q)`` of probability
  vectors.

Kernel orientation
------------------
``columns[i, j]`` is the mass that ``gamma(q_j)`` puts on ``q_i``: column
``j`` is the offspring distribution of a parent of type ``q_j``.  With this
layout the bullet action ``(gamma . mu)[g] = mu[q -> gamma(q)[g]]`` is the
plain matrix-vector product ``columns @ weights``.

The dual (flat) norm
--------------------
``||mu||* = sup{ mu(g) : ||g||_inf + ||g||_Lip <= 1 }`` is computed exactly
by a linear program over ``(g, s, L)`` with ``|g_i| <= s``,
``|g_i - g_j| <= L d_ij`` and ``s + L <= 1``.  On positive measures it is
the total mass.  Only elements of the dual are represented, so the single
dual norm is the only norm offered (other seminorms that agree on the dual
but differ on larger function spaces are out of reach here).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import simplex
from .errors import ConfigError, DimensionError
from .space import StrategySpace

LP_TOL = 1e-9
COLUMN_SUM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def _check_space(a: StrategySpace, b: StrategySpace) -> None:
    if not a.same_as(b):
        raise DimensionError(f"objects live on different strategy spaces (m={a.m} vs m={b.m})")


class BLNorms(NamedTuple):
    sup: float
    lip: float
    bl: float


@dataclass(frozen=True, eq=False)
class BLFunction:
    values: np.ndarray
    space: StrategySpace

    def __post_init__(self):
        values = _frozen(np.ravel(self.values) if np.ndim(self.values) else [self.values] * self.space.m)
        if values.shape != (self.space.m,):
            raise DimensionError(f"function has {values.size} values, space has {self.space.m} points")
        object.__setattr__(self, "values", values)

    @classmethod
    def constant(cls, space: StrategySpace, c: float = 1.0) -> "BLFunction":
        return cls(np.full(space.m, float(c)), space)

    def norms(self) -> BLNorms:
        return bl_norms(self)

    def __mul__(self, other):
        if isinstance(other, BLFunction):
            _check_space(self.space, other.space)
            return BLFunction(self.values * other.values, self.space)
        return BLFunction(self.values * float(other), self.space)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Signed measure ``sum_i weights[i] * delta_{q_i}``."""

    weights: np.ndarray
    space: StrategySpace

    def __post_init__(self):
        weights = _frozen(np.ravel(self.weights))
        if weights.shape != (self.space.m,):
            raise DimensionError(f"measure has {weights.size} weights, space has {self.space.m} points")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def zero(cls, space: StrategySpace) -> "DiscreteMeasure":
        return cls(np.zeros(space.m), space)

    @classmethod
    def dirac(cls, space: StrategySpace, index: int, mass: float = 1.0) -> "DiscreteMeasure":
        w = np.zeros(space.m)
        w[index] = mass
        return cls(w, space)

    @classmethod
    def from_density(cls, space: StrategySpace, density) -> "DiscreteMeasure":
        """Sampled density values times the space's quadrature weights."""
        values = np.asarray(density, dtype=float)
        return cls(values * space.quad_weights, space)

    @property
    def mass(self) -> float:
        """Total mass ``mu(1)``."""
        return float(self.weights.sum())

    def is_positive(self) -> bool:
        return bool(np.all(self.weights >= 0))

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        _check_space(self.space, other.space)
        return DiscreteMeasure(self.weights + other.weights, self.space)

    def __sub__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        _check_space(self.space, other.space)
        return DiscreteMeasure(self.weights - other.weights, self.space)

    def __neg__(self) -> "DiscreteMeasure":
        return DiscreteMeasure(-self.weights, self.space)

    def __mul__(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.weights * float(c), self.space)

    __rmul__ = __mul__

    def __truediv__(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.weights / float(c), self.space)


@dataclass(frozen=True, eq=False)
class MutationKernel:
    """Column-stochastic family of offspring distributions.

    ``lip_bound`` is ``None`` until certified with :func:`certify_kernel_lip`
    (certification costs one LP per pair of strategies).  Pass
    ``validate=False`` to build an invalid kernel on purpose, e.g. for
    fault-injection tests.
    """

    columns: np.ndarray
    space: StrategySpace
    lip_bound: Optional[float] = None
    validate: bool = True

    def __post_init__(self):
        cols = _frozen(self.columns)
        m = self.space.m
        if cols.shape != (m, m):
            raise DimensionError(f"kernel matrix has shape {cols.shape}, expected ({m}, {m})")
        object.__setattr__(self, "columns", cols)
        if self.validate:
            problems = kernel_column_problems(cols)
            if problems:
                raise ConfigError("invalid mutation kernel: " + "; ".join(problems))
        if self.lip_bound is not None and self.lip_bound < 0:
            raise ConfigError("lip_bound must be nonnegative")

    def column(self, j: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.columns[:, j], self.space)

    def with_lip_bound(self, bound: float) -> "MutationKernel":
        return MutationKernel(self.columns, self.space, float(bound), self.validate)


def kernel_column_problems(columns: np.ndarray, tol: float = COLUMN_SUM_TOL) -> list:
    """Human-readable list of columns that are not probability vectors."""
    problems = []
    cols = np.asarray(columns)
    for j in np.flatnonzero(np.any(cols < 0, axis=0)):
        problems.append(f"column {j} has a negative entry")
    sums = cols.sum(axis=0)
    for j in np.flatnonzero(np.abs(sums - 1.0) > tol):
        problems.append(f"column {j} sums to {sums[j]:.12g}, not 1")
    return problems


# ---------------------------------------------------------------------------
# norms and pairing


def bl_norms(g: BLFunction) -> BLNorms:
    v = g.values
    sup = float(np.max(np.abs(v)))
    m = len(v)
    if m < 2:
        lip = 0.0
    else:
        iu = np.triu_indices(m, 1)
        lip = float(np.max(np.abs(v[iu[0]] - v[iu[1]]) / g.space.dist[iu]))
    return BLNorms(sup, lip, sup + lip)


def pair(mu: DiscreteMeasure, g: BLFunction) -> float:
    """``mu[g] = sum_i w_i g(q_i)``."""
    _check_space(mu.space, g.space)
    return float(np.dot(mu.weights, g.values))


def _flat_lp(dist: np.ndarray):
    """Constraint matrix of the flat-norm LP in nonnegative variables.

    Variables are ``h = g + s`` (m entries), then ``s`` and ``L``.
    """
    m = dist.shape[0]
    n = m + 2
    rows = []
    box = np.zeros((m, n))
    box[np.arange(m), np.arange(m)] = 1.0
    box[:, m] = -2.0
    rows.append(box)
    if m > 1:
        i, j = np.nonzero(~np.eye(m, dtype=bool))
        lip = np.zeros((len(i), n))
        lip[np.arange(len(i)), i] = 1.0
        lip[np.arange(len(i)), j] = -1.0
        lip[:, m + 1] = -dist[i, j]
        rows.append(lip)
    budget = np.zeros((1, n))
    budget[0, m] = budget[0, m + 1] = 1.0
    rows.append(budget)
    A = np.vstack(rows)
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    return A, b


_LP_CACHE: dict = {}


def _lp_for(space: StrategySpace):
    key = id(space)
    hit = _LP_CACHE.get(key)
    if hit is not None and hit[0] is space:
        return hit[1], hit[2]
    A, b = _flat_lp(space.dist)
    if len(_LP_CACHE) > 64:
        _LP_CACHE.clear()
    _LP_CACHE[key] = (space, A, b)
    return A, b


@dataclass
class FlatNormSolution:
    value: float
    g: np.ndarray
    s: float
    L: float


def flat_norm_solution(mu: DiscreteMeasure) -> FlatNormSolution:
    """Flat norm together with a maximizing test function ``g``."""
    w = np.asarray(mu.weights, dtype=float)
    scale = float(np.abs(w).sum())
    m = len(w)
    if scale == 0.0:
        return FlatNormSolution(0.0, np.zeros(m), 0.0, 0.0)
    # the norm is homogeneous; solving at unit l1 mass keeps pivots well scaled
    w = w / scale
    A, b = _lp_for(mu.space)
    c = np.concatenate([w, [-w.sum(), 0.0]])
    res = simplex.maximize(c, A, b)
    s, L = res.x[m], res.x[m + 1]
    g = res.x[:m] - s
    value = max(float(np.dot(w, g)), 0.0)
    return FlatNormSolution(value * scale, g, float(s), float(L))


def flat_norm(mu: DiscreteMeasure) -> float:
    """Exact dual bounded-Lipschitz norm of a signed measure."""
    return flat_norm_solution(mu).value


def flat_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    _check_space(mu.space, nu.space)
    return flat_norm(mu - nu)


# ---------------------------------------------------------------------------
# bullet action


def bullet(gamma: MutationKernel, mu: DiscreteMeasure) -> DiscreteMeasure:
    """``(gamma . mu)[g] = mu[q -> gamma(q)[g]]``."""
    _check_space(gamma.space, mu.space)
    return DiscreteMeasure(gamma.columns @ mu.weights, mu.space)


def function_bullet(f: BLFunction, mu: DiscreteMeasure) -> DiscreteMeasure:
    """``(f . mu)[g] = mu[f g]``; the diagonal kernel ``f(q) delta_q`` acting on ``mu``."""
    _check_space(f.space, mu.space)
    return DiscreteMeasure(f.values * mu.weights, mu.space)


def diagonal_family(f: BLFunction) -> MutationKernel:
    """Embed ``f`` as the family ``q -> f(q) delta_q`` (not stochastic in general)."""
    return MutationKernel(np.diag(f.values), f.space, validate=False)


def kernel_sup_norm(gamma: MutationKernel) -> float:
    """``sup_q ||gamma(q)||*``."""
    return max(flat_norm(gamma.column(j)) for j in range(gamma.space.m))


def kernel_sup_norm_dist(g1: MutationKernel, g2: MutationKernel) -> float:
    """``||g1 - g2||_inf*``, the kernel part of the product metric."""
    _check_space(g1.space, g2.space)
    diff = g1.columns - g2.columns
    out = 0.0
    for j in np.flatnonzero(np.any(diff != 0, axis=0)):
        out = max(out, flat_norm(DiscreteMeasure(diff[:, j], g1.space)))
    return out


def kernel_lip(gamma: MutationKernel) -> float:
    """Max over pairs ``j != k`` of ``||gamma(q_j) - gamma(q_k)||* / d(q_j, q_k)``."""
    cols = gamma.columns
    d = gamma.space.dist
    m = gamma.space.m
    best = 0.0
    for j in range(m):
        for k in range(j + 1, m):
            diff = cols[:, j] - cols[:, k]
            if not np.any(diff):
                continue
            best = max(best, flat_norm(DiscreteMeasure(diff, gamma.space)) / d[j, k])
    return best


def certify_kernel_lip(gamma: MutationKernel) -> MutationKernel:
    """Return a copy of ``gamma`` whose ``lip_bound`` is its exact Lipschitz constant.

    The bound itself is available as ``.lip_bound`` on the result.
    """
    return gamma.with_lip_bound(kernel_lip(gamma))


def make_pure_selection(space: StrategySpace) -> MutationKernel:
    """The Dirac kernel ``q -> delta_q`` (identity columns)."""
    return MutationKernel(np.eye(space.m), space)


def make_smoothed_kernel(space: StrategySpace, bandwidth: float) -> MutationKernel:
    """Gaussian mutation: column ``j`` proportional to ``exp(-d_ij^2/bw^2) * quad_weights[i]``."""
    if not bandwidth > 0:
        raise ConfigError(f"bandwidth must be positive, got {bandwidth}")
    d = space.dist
    # shift by the column minimum before exponentiating so narrow kernels stay finite
    z = (d / bandwidth) ** 2
    z = z - z.min(axis=0, keepdims=True)
    cols = np.exp(-z) * space.quad_weights[:, None]
    cols = cols / cols.sum(axis=0, keepdims=True)
    return MutationKernel(cols, space)


def mix_kernels(g1: MutationKernel, g2: MutationKernel, t: float) -> MutationKernel:
    """Convex combination ``(1 - t) g1 + t g2``; stays column-stochastic."""
    _check_space(g1.space, g2.space)
    return MutationKernel((1.0 - t) * g1.columns + t * g2.columns, g1.space)
