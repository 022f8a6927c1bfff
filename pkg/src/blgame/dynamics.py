"""Selection-mutation dynamics on a finite strategy space.

The state is a weight vector ``w`` (a :class:`DiscreteMeasure`) and the
vector field is

    F(w) = G @ (B(X) * w) - D(X) * w,      X = sum(w),

where ``G`` holds the mutation kernel columns.  Two integrators are
provided:

``picard``
    Iterates the variation-of-constants map on each step: death acts as an
    exponential damping factor and births enter through a time integral,
    both by trapezoidal quadrature on a sub-grid of the step.  Every term is
    a nonnegative combination of nonnegative quantities, so positive data
    stay exactly positive.
``rk4``
    Classical explicit Runge-Kutta on the weight ODE; no positivity
    guarantee, but it accepts signed data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .bl import (
    BLFunction,
    DiscreteMeasure,
    MutationKernel,
    _check_space,
    flat_norm,
    kernel_sup_norm,
)
from .errors import ConfigError, StepFailure
from .rates import VitalRates, rate_norms, truncate

PICARD_SUBSTEPS = 8
PICARD_TOL = 1e-12
PICARD_MAX_ITER = 50


@dataclass(frozen=True)
class GameState:
    mu: DiscreteMeasure
    t: float = 0.0


@dataclass(eq=False)
class Trajectory:
    """States of one run on the uniform time grid ``times``.

    ``weights[k]`` is the weight vector at ``times[k]``; ``states`` gives
    the same data as :class:`DiscreteMeasure` objects.
    """

    times: np.ndarray
    weights: np.ndarray
    gamma: MutationKernel
    rates: VitalRates
    scheme: str = "picard"
    dt: float = 0.0
    picard_iterations: List[int] = field(default_factory=list)

    @property
    def space(self):
        return self.gamma.space

    def __len__(self) -> int:
        return len(self.times)

    def state(self, k: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.weights[k], self.space)

    @property
    def states(self) -> List[DiscreteMeasure]:
        return [self.state(k) for k in range(len(self.times))]

    @property
    def masses(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    @property
    def final(self) -> DiscreteMeasure:
        return self.state(len(self.times) - 1)

    def index_of(self, t: float, tol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > tol * max(1.0, abs(t)):
            raise ConfigError(f"t={t} is not a sample time of the trajectory")
        return k


# ---------------------------------------------------------------------------
# vector field


def _field(w: np.ndarray, G: np.ndarray, rates: VitalRates) -> np.ndarray:
    X = float(w.sum())
    return G @ (rates.birth(X) * w) - rates.death(X) * w


def vector_field(mu: DiscreteMeasure, gamma: MutationKernel, rates: VitalRates) -> DiscreteMeasure:
    """``F(mu) = B(mu(1), .) gamma . mu - D(mu(1), .) . mu``."""
    _check_space(mu.space, gamma.space)
    if rates.m != mu.space.m:
        raise ConfigError(f"rates are defined for {rates.m} strategies, space has {mu.space.m}")
    return DiscreteMeasure(_field(np.asarray(mu.weights), gamma.columns, rates), mu.space)


def vector_field_truncated(
    mu: DiscreteMeasure, gamma: MutationKernel, rates: VitalRates, N: float
) -> DiscreteMeasure:
    return vector_field(mu, gamma, truncate(rates, N))


@dataclass
class FieldLipschitz:
    """Constants of the local Lipschitz estimate for the truncated field.

    For positive ``zeta, beta`` and kernels ``gamma, lam``::

        ||F_N(zeta, gamma) - F_N(beta, lam)||*
            <= kernel_coef * ||gamma - lam||_inf* + measure_coef * ||zeta - beta||*
    """

    kernel_coef: float
    measure_coef: float


def field_lipschitz_constants(
    zeta: DiscreteMeasure, lam: MutationKernel, rates: VitalRates, N: float
) -> FieldLipschitz:
    """Evaluate the estimate's coefficients at ``(zeta, lam)``.

    ``lam`` must carry a certified ``lip_bound``.  Rate norms are sampled on
    ``[0, N]`` (see :class:`~blgame.rates.RateNorms`).
    """
    if lam.lip_bound is None:
        raise ConfigError("kernel needs a certified lip_bound (see certify_kernel_lip)")
    tr = truncate(rates, N)
    dist = zeta.space.dist
    bn = rate_norms(tr.birth, N, dist)
    dn = rate_norms(tr.death, N, dist)
    z = flat_norm(zeta)
    lam_bl = kernel_sup_norm(lam) + lam.lip_bound
    kernel_coef = bn.sup * z
    measure_coef = bn.lip_x * z + bn.bl * lam_bl + z * dn.bl + dn.bl
    return FieldLipschitz(kernel_coef, measure_coef)


# ---------------------------------------------------------------------------
# Picard stepping


@dataclass
class PicardResult:
    nodes: np.ndarray  # (substeps + 1, m) weights on the step's sub-grid
    iterations: int
    increment: float  # l1 size of the last fixed-point update


def picard_map(Z: np.ndarray, u: np.ndarray, G: np.ndarray, rates: VitalRates, h: float) -> np.ndarray:
    """One application of the variation-of-constants map on the sub-grid.

    ``Z[n]`` approximates the state at ``n * h``; the result is

        exp(-int_0^t D) u + int_0^t exp(-int_s^t D) G (B(s) Z(s)) ds

    at every node, with both integrals by the trapezoidal rule.
    """
    n = Z.shape[0]
    X = Z.sum(axis=1)
    D = np.array([rates.death(x) for x in X])
    B = np.array([rates.birth(x) for x in X])
    cumD = np.zeros_like(D)
    cumD[1:] = np.cumsum(0.5 * h * (D[1:] + D[:-1]), axis=0)
    source = (B * Z) @ G.T  # row l: G @ (B_l * Z_l), nonnegative for Z >= 0

    weights = _trapezoid_table(n, h)  # weights[k, l]: quadrature weight of node l in [0, t_k]
    damp = np.exp(-np.maximum(cumD[:, None, :] - cumD[None, :, :], 0.0))  # (k, l, m)
    out = damp[:, 0, :] * u + np.einsum("kl,klm,lm->km", weights, damp, source)
    out[0] = u
    return out


_TRAPZ_CACHE: dict = {}


def _trapezoid_table(n: int, h: float) -> np.ndarray:
    key = (n, h)
    table = _TRAPZ_CACHE.get(key)
    if table is None:
        table = np.zeros((n, n))
        for k in range(1, n):
            table[k, : k + 1] = h
            table[k, 0] = table[k, k] = 0.5 * h
        if len(_TRAPZ_CACHE) > 32:
            _TRAPZ_CACHE.clear()
        _TRAPZ_CACHE[key] = table
    return table


def picard_nodes(
    u: np.ndarray,
    G: np.ndarray,
    rates: VitalRates,
    dt: float,
    tol: float = PICARD_TOL,
    max_iter: int = PICARD_MAX_ITER,
    substeps: int = PICARD_SUBSTEPS,
) -> PicardResult:
    """Fixed point of :func:`picard_map` on one step, started from ``Z = u``.

    Iterates until the largest l1 change over the sub-grid nodes is below
    ``tol``.  The l1 norm bounds the flat norm from above, so this also
    certifies convergence in the flat norm.
    """
    u = np.asarray(u, dtype=float)
    h = dt / substeps
    Z = np.tile(u, (substeps + 1, 1))
    increment = math.inf
    for it in range(1, max_iter + 1):
        Z_new = picard_map(Z, u, G, rates, h)
        increment = float(np.max(np.abs(Z_new - Z).sum(axis=1)))
        Z = Z_new
        if increment < tol:
            return PicardResult(Z, it, increment)
    raise StepFailure(
        f"Picard iteration did not converge in {max_iter} iterations "
        f"(last increment {increment:.3e} >= tol {tol:.1e}); try a smaller dt"
    )


def step_picard(
    state: GameState,
    gamma: MutationKernel,
    rates: VitalRates,
    dt: float,
    tol: float = PICARD_TOL,
    max_iter: int = PICARD_MAX_ITER,
    substeps: int = PICARD_SUBSTEPS,
) -> GameState:
    if not dt > 0:
        raise ConfigError("dt must be positive")
    _check_space(state.mu.space, gamma.space)
    if not state.mu.is_positive():
        raise ConfigError("the Picard scheme needs a positive measure; use rk4 for signed data")
    try:
        res = picard_nodes(state.mu.weights, gamma.columns, rates, dt, tol, max_iter, substeps)
    except StepFailure as exc:
        raise StepFailure(f"step at t={state.t:g}: {exc}", t=state.t) from None
    return GameState(DiscreteMeasure(res.nodes[-1], state.mu.space), state.t + dt)


def _rk4(w: np.ndarray, G: np.ndarray, rates: VitalRates, dt: float) -> np.ndarray:
    k1 = _field(w, G, rates)
    k2 = _field(w + 0.5 * dt * k1, G, rates)
    k3 = _field(w + 0.5 * dt * k2, G, rates)
    k4 = _field(w + dt * k3, G, rates)
    return w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(state: GameState, gamma: MutationKernel, rates: VitalRates, dt: float) -> GameState:
    if not dt > 0:
        raise ConfigError("dt must be positive")
    _check_space(state.mu.space, gamma.space)
    w = _rk4(np.asarray(state.mu.weights), gamma.columns, rates, dt)
    return GameState(DiscreteMeasure(w, state.mu.space), state.t + dt)


# ---------------------------------------------------------------------------
# semiflow


def step_count(T: float, dt: float) -> tuple:
    """Number of full ``dt`` steps in ``[0, T]`` and the leftover length."""
    ratio = T / dt
    n = int(round(ratio))
    if abs(ratio - n) <= 1e-9 * max(1.0, ratio):
        return n, 0.0
    n = int(math.floor(ratio))
    return n, T - n * dt


def evolve(
    u: DiscreteMeasure,
    gamma: MutationKernel,
    rates: VitalRates,
    T: float,
    scheme: str = "picard",
    dt: float = 0.01,
    tol: float = PICARD_TOL,
    max_iter: int = PICARD_MAX_ITER,
    substeps: int = PICARD_SUBSTEPS,
) -> Trajectory:
    """Integrate from ``u`` over ``[0, T]``, recording every step.

    States are sampled at multiples of ``dt``; if ``T`` is not a multiple a
    final shorter step lands exactly on ``T``.  ``T = 0`` returns the
    one-point trajectory ``[u]``.
    """
    if scheme not in ("picard", "rk4"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    if T < 0 or not dt > 0:
        raise ConfigError("need T >= 0 and dt > 0")
    _check_space(u.space, gamma.space)
    if rates.m != u.space.m:
        raise ConfigError(f"rates are defined for {rates.m} strategies, space has {u.space.m}")
    if scheme == "picard" and not u.is_positive():
        raise ConfigError("the Picard scheme needs a positive initial measure; use rk4 for signed data")

    n, rest = step_count(T, dt)
    steps = [dt] * n + ([rest] if rest > 0 else [])
    times = np.empty(len(steps) + 1)
    times[0] = 0.0
    W = np.empty((len(steps) + 1, u.space.m))
    W[0] = u.weights
    G = gamma.columns
    iterations = []
    for k, h in enumerate(steps):
        t = k * dt
        if scheme == "picard":
            try:
                res = picard_nodes(W[k], G, rates, h, tol, max_iter, substeps)
            except StepFailure as exc:
                raise StepFailure(f"step at t={t:g}: {exc}", t=t) from None
            W[k + 1] = res.nodes[-1]
            iterations.append(res.iterations)
        else:
            W[k + 1] = _rk4(W[k], G, rates, h)
        times[k + 1] = T if (rest > 0 and k == len(steps) - 1) else (k + 1) * dt
    return Trajectory(times, W, gamma, rates, scheme, dt, iterations)


def constraint_residual(traj: Trajectory, g: BLFunction, t: float) -> float:
    """Mismatch between d/dt mu(t)[g] (central difference) and F(mu(t))[g]."""
    k = traj.index_of(t)
    if k == 0 or k == len(traj) - 1:
        raise ConfigError(f"t={t} must be an interior sample time")
    _check_space(g.space, traj.space)
    gv = np.asarray(g.values)
    slope = (traj.weights[k + 1] @ gv - traj.weights[k - 1] @ gv) / (traj.times[k + 1] - traj.times[k - 1])
    field_value = _field(traj.weights[k], traj.gamma.columns, traj.rates) @ gv
    return float(abs(slope - field_value))
