"""Brute-force flat-norm oracle for measures with tiny support.

Independent of the simplex path.  A bounded-Lipschitz function on the
support extends to the whole space with the same sup and Lipschitz bounds
(McShane extension, then clipping), so only the support points matter.

For a split ``s + L = 1`` the inner problem

    V(s) = max { sum_i w_i g_i : |g_i| <= s, |g_i - g_j| <= (1 - s) d_ij }

is solved by enumerating every vertex of the polytope (all ``k``-subsets of
the constraints).  ``V`` is concave in ``s`` (a parametric LP value), so a
dense grid over ``s`` followed by ternary refinement around the best grid
point locates its maximum to near machine precision.
"""

from __future__ import annotations

import itertools

import numpy as np

from .bl import DiscreteMeasure
from .errors import ConfigError

MAX_SUPPORT = 3
FEAS_TOL = 1e-12


class _VertexTable:
    """Vertices ``g(s) = g0 + s * g1`` of the inner polytope on ``k`` points."""

    def __init__(self, dist: np.ndarray):
        k = dist.shape[0]
        rows, box, lip = [], [], []
        for i in range(k):
            for sign in (1.0, -1.0):
                a = np.zeros(k)
                a[i] = sign
                rows.append(a)
                box.append(1.0)
                lip.append(0.0)
        for i in range(k):
            for j in range(k):
                if i != j:
                    a = np.zeros(k)
                    a[i], a[j] = 1.0, -1.0
                    rows.append(a)
                    box.append(0.0)
                    lip.append(dist[i, j])
        self.A = np.array(rows)
        self.box = np.array(box)  # rhs = s * box + (1 - s) * lip
        self.lip = np.array(lip)

        g0, g1 = [], []
        for subset in itertools.combinations(range(len(rows)), k):
            sub = self.A[list(subset)]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            inv = np.linalg.inv(sub)
            lip_part = inv @ self.lip[list(subset)]
            box_part = inv @ self.box[list(subset)]
            g0.append(lip_part)
            g1.append(box_part - lip_part)
        self.g0 = np.array(g0)
        self.g1 = np.array(g1)

    def values(self, w: np.ndarray, s: np.ndarray) -> np.ndarray:
        s = np.atleast_1d(s)
        G = self.g0[None, :, :] + s[:, None, None] * self.g1[None, :, :]
        lhs = G @ self.A.T
        rhs = s[:, None] * self.box[None, :] + (1.0 - s)[:, None] * self.lip[None, :]
        feasible = np.all(lhs <= rhs[:, None, :] + FEAS_TOL, axis=2)
        vals = np.where(feasible, G @ w, -np.inf)
        return vals.max(axis=1)


def flat_norm_oracle(mu: DiscreteMeasure, grid: int = 1001, refine: int = 120) -> float:
    """Flat norm by grid search over the sup/Lipschitz split.

    Raises
    ------
    ConfigError
        if the support of ``mu`` has more than three points.
    """
    w_full = np.asarray(mu.weights, dtype=float)
    support = np.flatnonzero(w_full)
    if support.size == 0:
        return 0.0
    if support.size > MAX_SUPPORT:
        raise ConfigError(f"oracle handles support of at most {MAX_SUPPORT} points, got {support.size}")
    w = w_full[support]
    if support.size == 1:
        return float(abs(w[0]))
    table = _VertexTable(mu.space.dist[np.ix_(support, support)])

    s_grid = np.linspace(0.0, 1.0, grid)
    vals = table.values(w, s_grid)
    best = int(np.argmax(vals))
    value = float(vals[best])
    lo = s_grid[max(best - 1, 0)]
    hi = s_grid[min(best + 1, grid - 1)]
    for _ in range(refine):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1, f2 = table.values(w, np.array([m1, m2]))
        value = max(value, f1, f2)
        if f1 < f2:
            lo = m1
        else:
            hi = m2
    return max(value, 0.0)
