"""Reproduction numbers, carrying capacities and dissipativity diagnostics.

``R(s, q) = B(s, q) / D(s, q)``; the carrying capacity ``K(q)`` solves
``R(K, q) = 1``.  Under the monotonicity assumptions on the rates, the
total mass of every positive solution eventually stays below
``K_diamond = max_q K(q)``; :func:`dissipativity_check` tests a trajectory
against that bound.

"limsup" is operationalized as the supremum over the final 25% of a run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import BracketError, ConfigError, DomainError
from .rates import VitalRates

BISECT_TOL = 1e-12
FINAL_FRACTION = 0.25


def reproduction_number(rates: VitalRates, s: float, i: int) -> float:
    d = rates.death_at(s, i)
    if d == 0:
        raise DomainError(f"R({s:g}, {i}) undefined: D({s:g}, {i}) = 0")
    return rates.birth_at(s, i) / d


def basic_reproduction_number(rates: VitalRates, i: int) -> float:
    """``R(0, i)``; ``inf`` for the logistic family without mortality floor."""
    if rates.family == "logistic_paper":
        return math.inf
    return reproduction_number(rates, 0.0, i)


def default_s_max(rates: VitalRates) -> float:
    varpi = rates.varpi
    if not varpi > 0:
        raise ConfigError("default bracket needs a positive mortality floor; pass s_max")
    return 10.0 * float(np.max(rates.birth(0.0))) / varpi


def carrying_capacity(
    rates: VitalRates,
    i: int,
    s_max: Optional[float] = None,
    tol: float = BISECT_TOL,
) -> Optional[float]:
    """Root of ``s -> R(s, i) - 1`` on ``[0, s_max]`` by bisection.

    Returns ``None`` when ``R0 < 1`` and ``0.0`` when ``R0 == 1`` within
    ``tol``.  The logistic family without mortality floor has the closed form
    ``q1 / q2``.

    Raises
    ------
    BracketError
        if ``R(s_max, i) >= 1`` while ``R0 > 1``.
    """
    if rates.family == "logistic_paper":
        return float(rates.params["q1"][i] / rates.params["q2"][i])
    r0 = reproduction_number(rates, 0.0, i)
    if abs(r0 - 1.0) < tol:
        return 0.0
    if r0 < 1.0:
        return None
    if s_max is None:
        s_max = default_s_max(rates)
    hi_val = reproduction_number(rates, s_max, i) - 1.0
    if hi_val >= 0:
        raise BracketError(
            f"R({s_max:g}, {i}) = {hi_val + 1:g} >= 1: no sign change, increase s_max"
        )
    lo, hi = 0.0, float(s_max)
    mid = 0.5 * (lo + hi)
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        val = reproduction_number(rates, mid, i) - 1.0
        if abs(val) < tol or hi - lo <= 4 * np.finfo(float).eps * max(1.0, hi):
            break
        if val > 0:
            lo = mid
        else:
            hi = mid
    return mid


@dataclass
class AsymptoticProfile:
    R0: np.ndarray
    K: List[Optional[float]]
    K_diamond: Optional[float]
    k_diamond: Optional[float]
    fittest: Optional[int] = None  # argmax K, lowest index on ties

    @property
    def defined(self) -> bool:
        return self.K_diamond is not None


def profile(rates: VitalRates, space=None, s_max: Optional[float] = None, tol: float = BISECT_TOL) -> AsymptoticProfile:
    if space is not None and space.m != rates.m:
        raise ConfigError(f"rates have {rates.m} strategies, space has {space.m}")
    R0 = np.array([basic_reproduction_number(rates, i) for i in range(rates.m)])
    K = [carrying_capacity(rates, i, s_max, tol) for i in range(rates.m)]
    vals = [(k, i) for i, k in enumerate(K) if k is not None]
    if not vals:
        return AsymptoticProfile(R0, K, None, None, None)
    K_diamond = max(k for k, _ in vals)
    k_diamond = min(k for k, _ in vals)
    fittest = min(i for k, i in vals if k == K_diamond)
    return AsymptoticProfile(R0, K, K_diamond, k_diamond, fittest)


def default_horizon(rates: VitalRates) -> float:
    """``20 / varpi``: inherent mortality sets the slowest decay scale."""
    varpi = rates.varpi
    if not varpi > 0:
        raise ConfigError("no mortality floor; choose a horizon explicitly")
    return 20.0 / varpi


def default_truncation(prof: AsymptoticProfile) -> Optional[float]:
    if prof.K_diamond is None:
        return None
    return float(math.ceil(prof.K_diamond) + 1)


@dataclass
class DissipativityReport:
    applicable: bool
    sup_mass: float = math.nan
    bound: float = math.nan
    bounded_ok: bool = False
    max_slope_above: float = -math.inf  # largest discrete mass derivative while mass > K_diamond
    monotone_ok: bool = True
    reproduction_ok: bool = True  # R(mass, i) < 1 for all i whenever mass > K_diamond
    samples_above: int = 0
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.applicable and self.bounded_ok and self.monotone_ok and self.reproduction_ok


def dissipativity_check(
    traj,
    prof: AsymptoticProfile,
    burn_in: Optional[float] = None,
    slack: float = 0.0,
    slope_tol: float = 1e-6,
    band: float = 0.0,
) -> DissipativityReport:
    """Check the eventual mass bound and the decrease above ``K_diamond``.

    ``burn_in`` defaults to the start of the final quarter of the run.
    Slopes are checked wherever mass exceeds ``K_diamond + band``.  The
    trapezoidal Picard scheme moves equilibria by O(dt^2), so a run that
    settles exactly at ``K_diamond`` (pure selection) needs a band of that
    order; ``band = 0`` is the strict check.
    """
    if prof.K_diamond is None:
        return DissipativityReport(False, notes=["no strategy has R0 >= 1; K_diamond undefined"])
    times = np.asarray(traj.times)
    mass = np.asarray(traj.masses)
    if burn_in is None:
        burn_in = times[-1] * (1.0 - FINAL_FRACTION)
    if burn_in > times[-1]:
        raise ConfigError("trajectory ends before burn_in")
    tail = mass[times >= burn_in]
    sup_mass = float(tail.max())
    bound = prof.K_diamond + slack

    slopes = np.diff(mass) / np.diff(times)
    above = mass[:-1] > prof.K_diamond + band
    max_slope = float(slopes[above].max()) if above.any() else -math.inf

    reproduction_ok = True
    notes = []
    rates = traj.rates
    for X in mass[mass > prof.K_diamond]:
        if rates.family == "logistic_paper" and X > 0:
            r = rates.params["q1"] / (rates.params["q2"] * X)
        else:
            r = rates.birth(X) / rates.death(X)
        if np.any(r >= 1.0):
            reproduction_ok = False
            notes.append(f"R({X:g}, .) >= 1 for some strategy")
            break
    return DissipativityReport(
        applicable=True,
        sup_mass=sup_mass,
        bound=bound,
        bounded_ok=sup_mass <= bound,
        max_slope_above=max_slope,
        monotone_ok=max_slope <= slope_tol,
        reproduction_ok=reproduction_ok,
        samples_above=int(above.sum()),
        notes=notes,
    )
