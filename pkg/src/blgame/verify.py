"""Built-in invariant suites.

Every check draws its random instances from ``default_rng([seed, k])``
with ``k`` fixed per check, so results do not depend on which other
checks ran.  A check reports how many cases it ran, the worst margin
(``tolerance - error``; negative means failure) and a short detail line.

Suites
------
``default``
    Full-size instances; this is the acceptance gate.
``quick``
    Same checks with fewer cases and shorter horizons, for seed sweeps.
"""

from __future__ import annotations

import inspect
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .asymptotics import default_horizon, dissipativity_check, profile
from .bl import (
    BLFunction,
    DiscreteMeasure,
    MutationKernel,
    bl_norms,
    bullet,
    flat_distance,
    flat_norm,
    function_bullet,
    kernel_sup_norm,
    kernel_sup_norm_dist,
    make_pure_selection,
    make_smoothed_kernel,
    mix_kernels,
    pair,
)
from .dynamics import PICARD_TOL, constraint_residual, evolve, picard_nodes, vector_field
from .errors import ConfigError
from .oracle import flat_norm_oracle
from .rates import make_logistic_a2, make_logistic_paper, truncate
from .space import build_explicit, build_grid

FAULTS = ("broken-kernel",)
BOUND_TOL = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    count: int
    worst_margin: float
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.name}: {self.count} cases, worst margin {self.worst_margin:.3e}, "
            f"{self.seconds:.2f}s; {self.detail}"
        )


@dataclass
class VerifyReport:
    suite: str
    seed: int
    results: List[CheckResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def format(self) -> str:
        lines = [f"suite {self.suite}, seed {self.seed}"]
        lines += [r.line() for r in self.results]
        failed = sum(not r.passed for r in self.results)
        lines.append(f"{len(self.results) - failed}/{len(self.results)} checks passed")
        return "\n".join(lines)


@dataclass
class Context:
    """State shared across the checks of one suite run."""

    fault: Optional[str] = None
    picard_runs: int = 0
    picard_min_weight: float = math.inf

    def record(self, traj) -> None:
        if traj.scheme == "picard":
            self.picard_runs += 1
            self.picard_min_weight = min(self.picard_min_weight, float(traj.weights.min()))


def _result(name, errors, tol, detail="", extra_ok=True) -> CheckResult:
    errors = np.asarray(errors, dtype=float)
    margin = float(tol - errors.max()) if errors.size else math.inf
    return CheckResult(name, bool(margin >= 0 and extra_ok), int(errors.size), margin, detail)


def _random_space(rng, m, dim=2, scale=1.0):
    while True:
        pts = rng.uniform(0.0, scale, size=(m, dim))
        if m == 1 or np.min(np.linalg.norm(pts[:, None] - pts[None], axis=-1)[np.triu_indices(m, 1)]) > 1e-3 * scale:
            return build_explicit(pts)


def _random_kernel(rng, space) -> MutationKernel:
    cols = rng.dirichlet(np.ones(space.m), size=space.m).T
    return MutationKernel(cols, space)


# ---------------------------------------------------------------------------
# norms


def check_flat_norm_oracle(rng, ctx, n=200, time_limit=30.0) -> CheckResult:
    """LP flat norm vs brute-force vertex enumeration on <= 3 points."""
    errs = []
    for _ in range(n):
        k = int(rng.integers(1, 4))
        space = _random_space(rng, k, scale=10 ** rng.uniform(-1, 1))
        w = rng.uniform(-1, 1, size=k) * 10 ** rng.uniform(-1, 1)
        mu = DiscreteMeasure(w, space)
        errs.append(abs(flat_norm(mu) - flat_norm_oracle(mu)))
    return _result("flat_norm_oracle", errs, BOUND_TOL, f"max |LP - oracle| = {max(errs):.2e}")


def check_positive_identity(rng, ctx, n=200, time_limit=30.0) -> CheckResult:
    """``flat_norm(mu) == mu(1)`` for positive ``mu``."""
    errs = []
    for _ in range(n):
        m = int(rng.integers(1, 9))
        space = _random_space(rng, m)
        w = rng.uniform(0, 1, size=m) * (rng.uniform(size=m) < 0.7)
        mu = DiscreteMeasure(w, space)
        errs.append(abs(flat_norm(mu) - mu.mass))
    return _result("positive_identity", errs, BOUND_TOL, f"max |norm - mass| = {max(errs):.2e}")


def check_norm_inequalities(rng, ctx, n=100) -> CheckResult:
    """Triangle inequality, homogeneity and ``|mu(1)| <= ||mu|| <= l1``."""
    margins = []
    for _ in range(n):
        m = int(rng.integers(2, 7))
        space = _random_space(rng, m)
        mu = DiscreteMeasure(rng.normal(size=m), space)
        nu = DiscreteMeasure(rng.normal(size=m), space)
        c = rng.uniform(-5, 5)
        a, b, ab = flat_norm(mu), flat_norm(nu), flat_norm(mu + nu)
        margins.append(a + b - ab)
        margins.append(-abs(flat_norm(mu * c) - abs(c) * a) / max(1.0, abs(c) * a))
        margins.append(np.abs(mu.weights).sum() - a)
        margins.append(a - abs(mu.mass))
    errs = -np.asarray(margins)
    return _result("norm_inequalities", errs, BOUND_TOL, "triangle, scaling, mass <= norm <= l1")


# ---------------------------------------------------------------------------
# bullet


def check_kernel_bound(rng, ctx, n=200, time_limit=60.0) -> CheckResult:
    """``||gamma . mu|| <= sup_q ||gamma(q)|| * ||mu||`` for positive ``mu``."""
    errs = []
    for _ in range(n):
        m = int(rng.integers(2, 7))
        space = _random_space(rng, m)
        gamma = _random_kernel(rng, space)
        mu = DiscreteMeasure(rng.uniform(0, 2, size=m), space)
        errs.append(flat_norm(bullet(gamma, mu)) - kernel_sup_norm(gamma) * flat_norm(mu))
    return _result("bullet_kernel_bound", errs, BOUND_TOL, "lhs - rhs, tolerance 1e-9")


def check_function_bound(rng, ctx, n=200, time_limit=60.0) -> CheckResult:
    """``||f . mu|| <= ||f||_BL * ||mu||`` for signed ``mu``."""
    errs = []
    for _ in range(n):
        m = int(rng.integers(2, 7))
        space = _random_space(rng, m)
        f = BLFunction(rng.uniform(-2, 2, size=m), space)
        mu = DiscreteMeasure(rng.normal(size=m), space)
        errs.append(flat_norm(function_bullet(f, mu)) - bl_norms(f).bl * flat_norm(mu))
    return _result("bullet_function_bound", errs, BOUND_TOL, "lhs - rhs, tolerance 1e-9")


def check_mass_law(rng, ctx, n=50) -> CheckResult:
    """``(gamma . mu)(1) == mu(1)`` and ``F(mu)(1) == mu[B - D]``.

    The ``broken-kernel`` fault scales every column to mass 0.9.
    """
    errs = []
    for _ in range(n):
        m = int(rng.integers(2, 7))
        space = _random_space(rng, m)
        gamma = _random_kernel(rng, space)
        if ctx.fault == "broken-kernel":
            gamma = MutationKernel(0.9 * gamma.columns, space, validate=False)
        rates = make_logistic_a2(rng.uniform(1, 3, m), rng.uniform(0.5, 1.5, m), 0.5)
        mu = DiscreteMeasure(rng.uniform(0, 2, size=m), space)
        X = mu.mass
        scale = max(1.0, X)
        errs.append(abs(bullet(gamma, mu).mass - X) / scale)
        F = vector_field(mu, gamma, rates)
        expected = pair(mu, BLFunction(rates.birth(X) - rates.death(X), space))
        errs.append(abs(F.mass - expected) / max(1.0, abs(expected)))
    return _result("bullet_mass_law", errs, 1e-12, "relative error of both mass identities")


# ---------------------------------------------------------------------------
# dynamics


def _logistic_5x5():
    space = build_grid([0.5, 0.5], [1.5, 1.5], [5, 5])
    rates = make_logistic_paper(space.points[:, 0], space.points[:, 1])
    return space, rates


def logistic_mass(t, x0, r, K):
    """Closed-form scalar logistic ``x' = r x (1 - x / K)``."""
    return K / (1.0 + (K / x0 - 1.0) * math.exp(-r * t))


def check_dirac_convergence(rng, ctx, T=200.0, dt=0.01, every=1.0, time_limit=60.0) -> CheckResult:
    """5x5 logistic game under pure selection concentrates on the fittest strategy."""
    from .experiment import flat_distance_to_dirac

    t0 = time.perf_counter()
    space, rates = _logistic_5x5()
    prof = profile(rates, space)
    target = prof.fittest
    u = DiscreteMeasure(np.full(space.m, 1.0 / space.m), space)
    traj = evolve(u, make_pure_selection(space), rates, T, "picard", dt)
    ctx.record(traj)
    stride = int(round(every / dt))
    ticks = np.arange(0, len(traj), stride)
    dists = np.array([flat_distance_to_dirac(traj.state(k), target) for k in ticks])
    late = dists[traj.times[ticks] >= T / 2]
    monotone = bool(np.all(np.diff(late) <= 0))
    q1, q2 = rates.params["q1"][target], rates.params["q2"][target]
    # scalar oracle: all mass on the fittest strategy, started from its own share
    oracle = logistic_mass(T, u.weights[target], q1, q1 / q2)
    mass_err = abs(traj.masses[-1] - oracle) / oracle
    elapsed = time.perf_counter() - t0
    errs = [dists[-1] / 0.05, mass_err / 0.02]
    ok = monotone and elapsed < time_limit
    detail = (
        f"target {target} {space.points[target].tolist()}, final distance {dists[-1]:.3e}, "
        f"tail monotone {monotone}, mass {traj.masses[-1]:.6f} vs {oracle:.6f}"
    )
    res = _result("dirac_convergence", errs, 1.0, detail, ok)
    res.worst_margin = min(1.0 - dists[-1] / 0.05, 1.0 - mass_err / 0.02)
    res.passed = bool(dists[-1] < 0.05 and mass_err <= 0.02 and ok)
    return res


def _a2_pair():
    space = build_explicit([[0.0], [1.0]])
    rates = make_logistic_a2([2.0, 3.0], 1.0, 1.0)
    return space, rates


def check_dissipativity(rng, ctx, dt=0.01, time_limit=10.0) -> CheckResult:
    """Mass starting at 3 K_diamond ends below K_diamond + 0.01 and decreases above it."""
    t0 = time.perf_counter()
    space, rates = _a2_pair()
    prof = profile(rates, space)
    gamma = MutationKernel(np.array([[0.95, 0.05], [0.05, 0.95]]), space)
    u = DiscreteMeasure(np.full(2, 1.5 * prof.K_diamond), space)
    traj = evolve(u, gamma, rates, default_horizon(rates), "picard", dt)
    ctx.record(traj)
    rep = dissipativity_check(traj, prof, slack=0.01, slope_tol=1e-6)
    elapsed = time.perf_counter() - t0
    margin = min(rep.bound - rep.sup_mass, 1e-6 - rep.max_slope_above)
    detail = (
        f"K_diamond {prof.K_diamond:.6g}, tail sup {rep.sup_mass:.6g}, "
        f"max slope above K {rep.max_slope_above:.3e}"
    )
    return CheckResult("dissipativity", bool(rep.passed and elapsed < time_limit), 1, margin, detail)


def _a2_instance(rng, m):
    space = _random_space(rng, m)
    rates = make_logistic_a2(rng.uniform(1, 3, m), rng.uniform(0.5, 1.5, m), 0.5)
    gamma = make_smoothed_kernel(space, 0.5)
    u = DiscreteMeasure(rng.uniform(0.1, 1.0, m), space)
    return space, rates, gamma, u


def check_semiflow(rng, ctx, n=20, dt=0.05) -> CheckResult:
    """``Phi(0) = id`` exactly and ``Phi(t + s) = Phi(t) o Phi(s)`` within 10 tol."""
    errs = []
    identity_ok = True
    for _ in range(n):
        space, rates, gamma, u = _a2_instance(rng, int(rng.integers(2, 6)))
        zero = evolve(u, gamma, rates, 0.0, "picard", dt)
        identity_ok &= len(zero) == 1 and np.array_equal(zero.weights[0], u.weights)
        s = dt * int(rng.integers(1, 21))
        t = dt * int(rng.integers(1, 21))
        whole = evolve(u, gamma, rates, t + s, "picard", dt)
        first = evolve(u, gamma, rates, s, "picard", dt)
        second = evolve(first.final, gamma, rates, t, "picard", dt)
        for tr in (whole, first, second):
            ctx.record(tr)
        errs.append(flat_distance(whole.final, second.final))
    return _result("semiflow", errs, 10 * PICARD_TOL, f"identity exact: {identity_ok}", identity_ok)


def check_lipschitz_ratio(rng, ctx, T=1.0, dt=0.01, eps=(1e-1, 1e-2, 1e-3)) -> CheckResult:
    """Response / perturbation ratio stays within a factor 3 across decades."""
    space = build_grid([0.0, 0.0], [1.0, 1.0], [3, 3])
    m = space.m
    rates = truncate(make_logistic_a2(1.0 + space.points[:, 0], 1.0 + space.points[:, 1], 0.5), 4.0)
    g1 = make_smoothed_kernel(space, 0.3)
    g_alt = make_pure_selection(space)
    u1 = DiscreteMeasure(rng.uniform(0.05, 0.2, m), space)
    direction = u1.weights * rng.uniform(-0.5, 0.5, m)
    base = evolve(u1, g1, rates, T, "picard", dt)
    ctx.record(base)
    ratios = []
    for e in eps:
        u2 = DiscreteMeasure(u1.weights + e * direction, space)
        g2 = mix_kernels(g1, g_alt, e)
        pert = evolve(u2, g2, rates, T, "picard", dt)
        ctx.record(pert)
        ratios.append(flat_distance(base.final, pert.final) / (flat_distance(u1, u2) + kernel_sup_norm_dist(g1, g2)))
    spread = max(ratios) / min(ratios)
    detail = "ratios " + ", ".join(f"{r:.4g}" for r in ratios) + f"; spread {spread:.3f}"
    return CheckResult("lipschitz_ratio", spread < 3.0, len(eps), 3.0 - spread, detail)


def check_residual_order(rng, ctx, n=5, dt=0.1, T=2.0) -> CheckResult:
    """Constraint residual at mid-trajectory shrinks 3x to 5x when dt halves."""
    space, rates, gamma, u = _a2_instance(rng, 3)
    u = DiscreteMeasure(u.weights * 0.2, space)  # start well below capacity
    coarse = evolve(u, gamma, rates, T, "picard", dt)
    fine = evolve(u, gamma, rates, T, "picard", dt / 2)
    ctx.record(coarse)
    ctx.record(fine)
    ratios = []
    for _ in range(n):
        g = BLFunction(rng.uniform(-1, 1, space.m), space)
        ratios.append(constraint_residual(coarse, g, T / 2) / constraint_residual(fine, g, T / 2))
    ratios = np.array(ratios)
    margin = float(min(ratios.min() - 3.0, 5.0 - ratios.max()))
    detail = "ratios " + ", ".join(f"{r:.3f}" for r in ratios)
    return CheckResult("residual_order", margin >= 0, n, margin, detail)


def check_picard_vs_rk4(rng, ctx, T=1.0, dt=1e-3) -> CheckResult:
    """Both integrators agree to 1e-4 in flat norm on the two-strategy game."""
    space, rates = _a2_pair()
    gamma = MutationKernel(np.array([[0.9, 0.1], [0.1, 0.9]]), space)
    u = DiscreteMeasure(np.array([1.0, 0.5]), space)
    a = evolve(u, gamma, rates, T, "picard", dt)
    b = evolve(u, gamma, rates, T, "rk4", dt)
    ctx.record(a)
    d = flat_distance(a.final, b.final)
    return _result("picard_vs_rk4", [d], 1e-4, f"flat distance {d:.3e}")


def integral_form_step(nodes, u, columns, birth, death, h):
    """State at the end of a step from the integral representation, by explicit loops.

    ``nodes[l]`` is the state at ``l * h``; ``birth(X)`` and ``death(X)``
    return per-strategy rates.  Both time integrals use the trapezoidal rule.
    """
    n = len(nodes)
    m = len(u)
    X = [sum(nodes[l]) for l in range(n)]
    D = [death(X[l]) for l in range(n)]
    B = [birth(X[l]) for l in range(n)]

    def survival(i, l):
        # exp(-int_{t_l}^{t_end} D(X(tau), q_i) dtau)
        acc = 0.0
        for r in range(l, n - 1):
            acc += 0.5 * h * (D[r][i] + D[r + 1][i])
        return math.exp(-acc)

    out = np.zeros(m)
    for i in range(m):
        total = survival(i, 0) * u[i]
        for l in range(n):
            w = h if 0 < l < n - 1 else 0.5 * h
            inner = 0.0
            for j in range(m):
                # parent j at time t_l, offspring in i, surviving to the end
                inner += B[l][j] * nodes[l][j] * columns[i][j]
            total += w * survival(i, l) * inner
        out[i] = total
    return out


def check_measure_form(rng, ctx, dt=0.1) -> CheckResult:
    """One Picard step equals the integral representation on a 3-point space."""
    space = _random_space(rng, 3)
    gamma = _random_kernel(rng, space)
    rates = make_logistic_a2(rng.uniform(1, 3, 3), rng.uniform(0.5, 1.5, 3), 0.5)
    u = rng.uniform(0.2, 1.5, 3)
    res = picard_nodes(u, gamma.columns, rates, dt, tol=1e-14, max_iter=100)
    # feed the converged sub-grid states through the independent formula
    h = dt / (len(res.nodes) - 1)
    expected = integral_form_step(res.nodes, u, gamma.columns, rates.birth, rates.death, h)
    err = float(np.max(np.abs(expected - res.nodes[-1])))
    return _result("measure_form", [err], 1e-12, f"max abs difference {err:.2e} after {res.iterations} iterations")


def check_positivity(rng, ctx, n=10, dt=0.05) -> CheckResult:
    """Minimum weight over every Picard run of the suite is >= 0, exactly."""
    for _ in range(n):
        m = int(rng.integers(2, 7))
        space = _random_space(rng, m)
        rates = make_logistic_a2(rng.uniform(0.1, 1.0, m), rng.uniform(1.0, 5.0, m), 3.0)
        gamma = make_pure_selection(space) if rng.uniform() < 0.5 else _random_kernel(rng, space)
        w = rng.uniform(0, 1e-3, m) * (rng.uniform(size=m) < 0.6)
        ctx.record(evolve(DiscreteMeasure(w, space), gamma, rates, 5.0, "picard", dt))
    worst = ctx.picard_min_weight
    return CheckResult(
        "positivity",
        bool(worst >= 0.0),
        ctx.picard_runs,
        worst,
        f"min weight {worst:.3e} over {ctx.picard_runs} picard runs",
    )


# ---------------------------------------------------------------------------
# suites


@dataclass
class Entry:
    name: str
    fn: Callable
    kwargs: dict = field(default_factory=dict)


_ORDER = [
    ("flat_norm_oracle", check_flat_norm_oracle),
    ("positive_identity", check_positive_identity),
    ("norm_inequalities", check_norm_inequalities),
    ("bullet_kernel_bound", check_kernel_bound),
    ("bullet_function_bound", check_function_bound),
    ("bullet_mass_law", check_mass_law),
    ("dirac_convergence", check_dirac_convergence),
    ("dissipativity", check_dissipativity),
    ("semiflow", check_semiflow),
    ("lipschitz_ratio", check_lipschitz_ratio),
    ("residual_order", check_residual_order),
    ("picard_vs_rk4", check_picard_vs_rk4),
    ("measure_form", check_measure_form),
    ("positivity", check_positivity),  # last: it aggregates the runs above
]

_QUICK = {
    "flat_norm_oracle": {"n": 40},
    "positive_identity": {"n": 40},
    "norm_inequalities": {"n": 20},
    "bullet_kernel_bound": {"n": 40},
    "bullet_function_bound": {"n": 40},
    "bullet_mass_law": {"n": 20},
    "dirac_convergence": {"T": 50.0, "dt": 0.05},
    "semiflow": {"n": 5},
    "picard_vs_rk4": {"dt": 1e-2},
    "positivity": {"n": 3},
}

SUITES = {
    "default": [Entry(name, fn) for name, fn in _ORDER],
    "quick": [Entry(name, fn, _QUICK.get(name, {})) for name, fn in _ORDER],
}


def run_check(name: str, seed: int = 0, ctx: Optional[Context] = None, **kwargs) -> CheckResult:
    """Run a single named check with its own seeded generator."""
    index = [n for n, _ in _ORDER].index(name)
    fn = _ORDER[index][1]
    ctx = ctx or Context()
    rng = np.random.default_rng([seed, index])
    t0 = time.perf_counter()
    res = fn(rng, ctx, **kwargs)
    res.seconds = time.perf_counter() - t0
    limit = kwargs.get("time_limit")
    if limit is None:
        p = inspect.signature(fn).parameters.get("time_limit")
        limit = p.default if p is not None else None
    if limit is not None and res.seconds >= limit:
        res.passed = False
        res.detail += f"; over time limit {limit:g}s"
    return res


def run_verify(suite: str = "default", seed: int = 0, fault: Optional[str] = None) -> VerifyReport:
    if suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; available: {sorted(SUITES)}")
    if fault is not None and fault not in FAULTS:
        raise ConfigError(f"unknown fault {fault!r}; available: {list(FAULTS)}")
    ctx = Context(fault=fault)
    results = [run_check(e.name, seed, ctx, **e.kwargs) for e in SUITES[suite]]
    return VerifyReport(suite, seed, results)
