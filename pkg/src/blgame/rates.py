"""Density-dependent birth and death rates.

A :class:`VitalRates` evaluates ``B(X, q_i)`` and ``D(X, q_i)`` for all
strategies at once: ``rates.birth(X)`` returns a length-``m`` array.  Rates
built by the family constructors carry their parameters and a compliance
tag for the monotonicity assumptions (birth nonincreasing in total mass;
death nondecreasing with a positive floor ``varpi = min_i D(0, i)``).
Compliance is also checked numerically by :func:`check_assumptions`.

Truncation at level ``N`` clamps the mass argument to ``[0, N]`` so that
the rates become globally bounded and Lipschitz in ``X``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError

FAMILIES = ("logistic_paper", "logistic_a2", "ricker", "beverton_holt", "custom")


def _positive_vector(name: str, v, m: Optional[int] = None) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be a vector")
    if m is not None and arr.size == 1 and m > 1:
        arr = np.full(m, arr[0])
    if m is not None and arr.size != m:
        raise ConfigError(f"{name} has {arr.size} entries, expected {m}")
    if not np.all(np.isfinite(arr)) or not np.all(arr > 0):
        raise ConfigError(f"{name} must be componentwise positive, got {arr.tolist()}")
    arr.setflags(write=False)
    return arr


def _positive_scalar(name: str, v) -> float:
    v = float(v)
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{name} must be positive, got {v}")
    return v


@dataclass(frozen=True, eq=False)
class VitalRates:
    """Birth and death rate families over ``m`` strategies.

    ``birth_fn(X)`` and ``death_fn(X)`` take a scalar total mass and return
    an ``(m,)`` array.  Use :meth:`birth` / :meth:`death`, which apply the
    truncation when ``truncation_N`` is set.
    """

    birth_fn: Callable[[float], np.ndarray]
    death_fn: Callable[[float], np.ndarray]
    m: int
    family: str = "custom"
    params: dict = field(default_factory=dict)
    truncation_N: Optional[float] = None
    a1_compliant: Optional[bool] = None
    a2_compliant: Optional[bool] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown rate family {self.family!r}")
        if self.truncation_N is not None and not self.truncation_N > 0:
            raise ConfigError("truncation level must be positive")

    def clamp(self, X: float) -> float:
        if self.truncation_N is None:
            return X
        return min(max(X, 0.0), self.truncation_N)

    def birth(self, X: float) -> np.ndarray:
        return np.asarray(self.birth_fn(self.clamp(float(X))), dtype=float)

    def death(self, X: float) -> np.ndarray:
        return np.asarray(self.death_fn(self.clamp(float(X))), dtype=float)

    def birth_at(self, X: float, i: int) -> float:
        return float(self.birth(X)[i])

    def death_at(self, X: float, i: int) -> float:
        return float(self.death(X)[i])

    @property
    def varpi(self) -> float:
        """Inherent mortality floor ``min_i D(0, i)``."""
        return float(np.min(self.death(0.0)))

    def describe(self) -> dict:
        out = {"family": self.family, "truncation_N": self.truncation_N}
        for k, v in self.params.items():
            out[k] = np.asarray(v).tolist()
        return out


def make_logistic_paper(q1, q2) -> VitalRates:
    """``B(X, q) = q1``, ``D(X, q) = q2 X``: logistic growth with pure selection.

    Has no inherent mortality (``D(0, q) = 0``), so it is tagged as
    violating the positive-mortality-floor assumption.
    """
    q1 = _positive_vector("q1", q1)
    q2 = _positive_vector("q2", q2, q1.size)
    return VitalRates(
        birth_fn=lambda X: q1.copy(),
        death_fn=lambda X: q2 * X,
        m=q1.size,
        family="logistic_paper",
        params={"q1": q1, "q2": q2},
        a1_compliant=True,
        a2_compliant=False,
    )


def make_logistic_a2(q1, q2, w0) -> VitalRates:
    """``B = q1``, ``D = w0 + q2 X`` with ``w0 > 0``."""
    q1 = _positive_vector("q1", q1)
    q2 = _positive_vector("q2", q2, q1.size)
    w0 = _positive_scalar("w0", w0)
    return VitalRates(
        birth_fn=lambda X: q1.copy(),
        death_fn=lambda X: w0 + q2 * X,
        m=q1.size,
        family="logistic_a2",
        params={"q1": q1, "q2": q2, "w0": w0},
        a1_compliant=True,
        a2_compliant=True,
    )


def make_ricker(b, c, w0, d1) -> VitalRates:
    """``B = b exp(-c X)``, ``D = w0 + d1 X``."""
    b = _positive_vector("b", b)
    c = _positive_vector("c", c, b.size)
    d1 = _positive_vector("d1", d1, b.size)
    w0 = _positive_scalar("w0", w0)
    return VitalRates(
        birth_fn=lambda X: b * np.exp(-c * X),
        death_fn=lambda X: w0 + d1 * X,
        m=b.size,
        family="ricker",
        params={"b": b, "c": c, "w0": w0, "d1": d1},
        a1_compliant=True,
        a2_compliant=True,
    )


def make_beverton_holt(b, c, w0, d1) -> VitalRates:
    """``B = b / (1 + c X)``, ``D = w0 + d1 X``."""
    b = _positive_vector("b", b)
    c = _positive_vector("c", c, b.size)
    d1 = _positive_vector("d1", d1, b.size)
    w0 = _positive_scalar("w0", w0)
    return VitalRates(
        birth_fn=lambda X: b / (1.0 + c * X),
        death_fn=lambda X: w0 + d1 * X,
        m=b.size,
        family="beverton_holt",
        params={"b": b, "c": c, "w0": w0, "d1": d1},
        a1_compliant=True,
        a2_compliant=True,
    )


def make_custom(birth, death, m: int, **params) -> VitalRates:
    """Wrap user callables ``birth(X) -> (m,)`` and ``death(X) -> (m,)``.

    Compliance is unknown until :func:`check_assumptions` is run.
    """
    return VitalRates(birth, death, int(m), "custom", dict(params))


def truncate(rates: VitalRates, N: float) -> VitalRates:
    """Clamp the mass argument of both rates to ``[0, N]``."""
    return replace(rates, truncation_N=_positive_scalar("N", N))


@dataclass
class AssumptionReport:
    a1_ok: bool
    a2_monotone_ok: bool
    varpi: float
    a1_witness: Optional[tuple] = None  # (strategy, X_lo, X_hi)
    a2_witness: Optional[tuple] = None

    @property
    def a2_ok(self) -> bool:
        return self.a2_monotone_ok and self.varpi > 0

    @property
    def passed(self) -> bool:
        return self.a1_ok and self.a2_ok

    def messages(self) -> list:
        out = []
        if not self.a1_ok:
            i, x0, x1 = self.a1_witness
            out.append(f"birth increases for strategy {i} between X={x0:g} and X={x1:g}")
        if not self.a2_monotone_ok:
            i, x0, x1 = self.a2_witness
            out.append(f"death decreases for strategy {i} between X={x0:g} and X={x1:g}")
        if not self.varpi > 0:
            out.append(f"no inherent mortality: min_i D(0, i) = {self.varpi:g}")
        return out


def default_x_grid(rates: VitalRates, N: Optional[float] = None, n: int = 200) -> np.ndarray:
    N = N if N is not None else (rates.truncation_N or 10.0)
    return np.linspace(0.0, 2.0 * N, n)


def _sample(fn, xs) -> np.ndarray:
    return np.array([fn(x) for x in xs])


def check_assumptions(rates: VitalRates, x_grid=None) -> AssumptionReport:
    """Sample monotonicity of both rates on ``x_grid`` and report ``varpi``."""
    xs = np.asarray(default_x_grid(rates) if x_grid is None else x_grid, dtype=float)
    xs = np.sort(xs)
    Bs = _sample(rates.birth, xs)
    Ds = _sample(rates.death, xs)

    a1_witness = None
    inc = np.argwhere(np.diff(Bs, axis=0) > 0)
    if len(inc):
        k, i = map(int, inc[0])
        a1_witness = (i, float(xs[k]), float(xs[k + 1]))
    a2_witness = None
    dec = np.argwhere(np.diff(Ds, axis=0) < 0)
    if len(dec):
        k, i = map(int, dec[0])
        a2_witness = (i, float(xs[k]), float(xs[k + 1]))
    return AssumptionReport(
        a1_ok=a1_witness is None,
        a2_monotone_ok=a2_witness is None,
        varpi=rates.varpi,
        a1_witness=a1_witness,
        a2_witness=a2_witness,
    )


@dataclass
class RateNorms:
    """Sampled norms of a truncated rate ``j_N(X, q)`` on ``X in [0, N]``.

    ``sup``: max |j|; ``lip_x``: max slope in ``X`` over strategies;
    ``bl_q``: max over ``X`` of the BL norm of ``q -> j(X, q)``;
    ``bl``: ``bl_q + lip_x``, which dominates both the BL norm in ``q`` at
    any fixed mass and the Lipschitz constant in mass.
    """

    sup: float
    lip_x: float
    bl_q: float

    @property
    def bl(self) -> float:
        return self.bl_q + self.lip_x


def rate_norms(fn, N: float, dist: np.ndarray, n: int = 2001) -> RateNorms:
    xs = np.linspace(0.0, N, n)
    vals = _sample(fn, xs)  # (n, m)
    sup = float(np.max(np.abs(vals)))
    lip_x = float(np.max(np.abs(np.diff(vals, axis=0)) / np.diff(xs)[:, None]))
    m = vals.shape[1]
    if m > 1:
        iu = np.triu_indices(m, 1)
        lip_q = np.max(np.abs(vals[:, iu[0]] - vals[:, iu[1]]) / dist[iu][None, :], axis=1)
    else:
        lip_q = np.zeros(n)
    bl_q = float(np.max(np.max(np.abs(vals), axis=1) + lip_q))
    return RateNorms(sup, lip_x, bl_q)


def max_lipschitz_slope(rates: VitalRates, which: str = "birth", n: int = 2001) -> float:
    """Largest finite-difference slope in ``X`` on ``[0, N]`` for truncated rates."""
    if rates.truncation_N is None:
        raise ConfigError("Lipschitz bound in X needs a truncation level")
    fn = rates.birth if which == "birth" else rates.death
    xs = np.linspace(0.0, rates.truncation_N, n)
    vals = _sample(fn, xs)
    return float(np.max(np.abs(np.diff(vals, axis=0)) / np.diff(xs)[:, None]))
