"""Dense tableau simplex for small LPs of the form

    maximize  c @ x   subject to  A @ x <= b,  x >= 0,  with b >= 0.

``b >= 0`` makes the origin feasible, so no phase I is needed.  Flat-norm
LPs are highly degenerate (almost every right-hand side is zero).  Entering
variables follow Dantzig's rule; ties in the ratio test are broken by a
symbolic perturbation ``b + eps * delta`` (``delta`` fixed and generic),
tracked as a second right-hand side column, which prevents cycling.  Bland's
rule remains as a last-resort fallback after a very long degenerate run.

The tableau is kept in compact (dictionary) form: one row per basic
variable, one column per nonbasic variable, so its size is
``len(b) x len(c)`` rather than ``len(b) x (len(c) + len(b))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LPError

PIVOT_EPS = 1e-12
DEGENERATE_RUN = 1000


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    iterations: int


def maximize(c, A, b, eps: float = PIVOT_EPS, max_iter: int = 100_000) -> LPResult:
    c = np.asarray(c, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    p, n = A.shape
    if c.shape != (n,) or b.shape != (p,):
        raise LPError(f"inconsistent LP shapes: c{c.shape}, A{A.shape}, b{b.shape}")
    if np.any(b < 0):
        raise LPError("right-hand side must be nonnegative (origin infeasible)")

    # x_basic[i] = rhs[i] - T[i] @ x_nonbasic ;  z = z0 + obj @ x_nonbasic
    T = A.copy()
    rhs = b.copy()
    pert = np.random.default_rng(20240101).uniform(0.5, 1.5, size=p)
    obj = c.copy()
    z0 = 0.0
    nonbasic = np.arange(n)  # variable labels: 0..n-1 original, n..n+p-1 slacks
    basic = np.arange(n, n + p)

    bland = False
    degenerate = 0
    for it in range(max_iter):
        candidates = np.flatnonzero(obj > eps)
        if candidates.size == 0:
            x = np.zeros(n + p)
            x[basic] = rhs
            return LPResult(x[:n].copy(), float(z0), it)
        if bland:
            s = candidates[np.argmin(nonbasic[candidates])]
        else:
            s = candidates[np.argmax(obj[candidates])]

        col = T[:, s]
        rows = np.flatnonzero(col > eps)
        if rows.size == 0:
            raise LPError("LP is unbounded")
        ratios = rhs[rows] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + eps * max(1.0, abs(best))]
        if len(ties) == 1:
            r = ties[0]
        elif bland:
            r = ties[np.argmin(basic[ties])]
        else:
            r = ties[np.argmin(pert[ties] / col[ties])]

        if rhs[r] <= eps:
            degenerate += 1
            if degenerate >= DEGENERATE_RUN:
                bland = True
        else:
            degenerate = 0
            bland = False

        a = T[r, s]
        pivot_row = T[r].copy() / a
        pivot_row[s] = 1.0 / a
        pivot_rhs = rhs[r] / a
        pivot_pert = pert[r] / a

        col = col.copy()
        col[r] = 0.0
        T -= np.outer(col, pivot_row)
        T[:, s] = -col / a
        rhs -= col * pivot_rhs
        pert -= col * pivot_pert
        T[r] = pivot_row
        rhs[r] = pivot_rhs
        pert[r] = pivot_pert
        np.maximum(rhs, 0.0, out=rhs)

        cs = obj[s]
        obj -= cs * pivot_row
        obj[s] = -cs / a
        z0 += cs * pivot_rhs

        basic[r], nonbasic[s] = nonbasic[s], basic[r]
    raise LPError(f"simplex did not terminate in {max_iter} pivots")
