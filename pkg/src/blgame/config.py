"""Experiment configuration: a YAML document with strict keys.

Example::

    seed: 0
    space:
      grid: {lo: [0.5, 0.5], hi: [1.5, 1.5], counts: [5, 5]}
    rates:
      family: logistic_paper
      q1: coord:0          # vector, scalar, or a coordinate of the strategy
      q2: coord:1
      truncation: auto     # auto | none | number
    kernel:
      kind: pure_selection # pure_selection | smoothed (bandwidth) | explicit (matrix)
    initial:
      kind: uniform        # uniform (mass) | dirac (index, mass) | weights | density (expression)
      mass: 1.0
    integrator:
      scheme: picard       # picard | rk4
      dt: 0.01
      T: 200
    output:
      every: 1.0
      dir: logistic_5x5
      target: auto         # auto | none | strategy index

Validation collects every problem (with its key path) before raising
:class:`ConfigValidationError`.
"""

from __future__ import annotations

import ast
import copy
import math
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import yaml

from . import bl, rates as rates_mod, space as space_mod
from .asymptotics import default_truncation, profile
from .errors import BLGameError, ConfigError

SCHEMA = {
    "seed": None,
    "space": {
        "grid": {"lo": None, "hi": None, "counts": None},
        "explicit": {"points": None, "metric": None, "matrix": None, "quad_weights": None, "validate": None},
    },
    "rates": {
        "family": None,
        "q1": None,
        "q2": None,
        "w0": None,
        "b": None,
        "c": None,
        "d1": None,
        "truncation": None,
    },
    "kernel": {"kind": None, "bandwidth": None, "matrix": None},
    "initial": {"kind": None, "index": None, "mass": None, "weights": None, "expression": None},
    "integrator": {"scheme": None, "dt": None, "T": None, "tol": None, "max_iter": None, "substeps": None},
    "output": {"every": None, "dir": None, "target": None, "diagnostics": None},
}

FAMILY_PARAMS = {
    "logistic_paper": ("q1", "q2"),
    "logistic_a2": ("q1", "q2", "w0"),
    "ricker": ("b", "c", "w0", "d1"),
    "beverton_holt": ("b", "c", "w0", "d1"),
}

DIAGNOSTIC_COLUMNS = ("total_mass", "mean_strategy", "flat_distance_to_target", "min_weight", "constraint_residual")

DEFAULTS = {
    "seed": 0,
    "integrator": {"scheme": "picard", "dt": 0.01, "tol": 1e-12, "max_iter": 50, "substeps": 8},
    "output": {"dir": "run", "target": "auto", "diagnostics": list(DIAGNOSTIC_COLUMNS)},
}


class ConfigValidationError(ConfigError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class ExperimentConfig:
    """Validated configuration plus the objects it describes."""

    raw: dict
    space: space_mod.StrategySpace
    rates: rates_mod.VitalRates
    kernel: bl.MutationKernel
    initial: bl.DiscreteMeasure
    scheme: str
    dt: float
    T: float
    tol: float
    max_iter: int
    substeps: int
    every: float
    out_dir: str
    target: Optional[int]
    diagnostics: tuple
    seed: int
    text: str = ""
    profile: Any = None

    def echo(self) -> dict:
        return copy.deepcopy(self.raw)


def _unknown_keys(doc, schema, path, errors):
    if not isinstance(doc, dict):
        errors.append(f"{path or '<root>'}: expected a mapping, got {type(doc).__name__}")
        return
    for key, value in doc.items():
        where = f"{path}.{key}" if path else str(key)
        if key not in schema:
            errors.append(f"{where}: unknown key")
        elif isinstance(schema[key], dict) and value is not None:
            _unknown_keys(value, schema[key], where, errors)


def load_document(source: Union[str, Path, dict]) -> tuple:
    """Return ``(document, text)`` from a path, YAML text, or a dict."""
    if isinstance(source, dict):
        return copy.deepcopy(source), yaml.safe_dump(source, sort_keys=True)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).is_file()):
        text = Path(source).read_text()
    else:
        text = str(source)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigValidationError([f"YAML parse error: {exc}"]) from None
    if doc is None:
        doc = {}
    return doc, text


def _number(value, path, errors, positive=False, integer=False):
    try:
        if isinstance(value, bool):
            raise TypeError
        x = float(value)
    except (TypeError, ValueError):
        errors.append(f"{path}: expected a number, got {value!r}")
        return None
    if not math.isfinite(x):
        errors.append(f"{path}: must be finite")
        return None
    if positive and not x > 0:
        errors.append(f"{path}: must be positive, got {value}")
        return None
    if integer:
        if x != int(x):
            errors.append(f"{path}: must be an integer, got {value}")
            return None
        return int(x)
    return x


def _build_space(doc, errors):
    sp = doc.get("space")
    if not isinstance(sp, dict) or len(sp) != 1 or next(iter(sp)) not in ("grid", "explicit"):
        errors.append("space: needs exactly one of 'grid' or 'explicit'")
        return None
    kind, spec = next(iter(sp.items()))
    spec = spec or {}
    try:
        if kind == "grid":
            missing = [k for k in ("lo", "hi", "counts") if k not in spec]
            if missing:
                errors.append(f"space.grid: missing {', '.join(missing)}")
                return None
            return space_mod.build_grid(spec["lo"], spec["hi"], spec["counts"])
        if "points" not in spec:
            errors.append("space.explicit: missing points")
            return None
        return space_mod.build_explicit(
            spec["points"],
            metric=spec.get("metric", "euclidean"),
            matrix=spec.get("matrix"),
            quad_weights=spec.get("quad_weights"),
            validate=spec.get("validate"),
        )
    except (BLGameError, ValueError, TypeError) as exc:
        errors.append(f"space.{kind}: {exc}")
        return None


def _parameter(value, path, space, errors):
    m = space.m
    if isinstance(value, str) and value.startswith("coord:"):
        try:
            k = int(value.split(":", 1)[1])
            return np.array(space.points[:, k], dtype=float)
        except (ValueError, IndexError):
            errors.append(f"{path}: {value!r} does not name a coordinate (space has dimension {space.dim})")
            return None
    try:
        arr = np.atleast_1d(np.asarray(value, dtype=float))
    except (TypeError, ValueError):
        errors.append(f"{path}: expected a number, a list, or 'coord:<k>', got {value!r}")
        return None
    if arr.ndim != 1:
        errors.append(f"{path}: expected a vector")
        return None
    if arr.size == 1:
        return np.full(m, arr[0])
    if arr.size != m:
        errors.append(f"{path}: has {arr.size} entries but the space has {m} strategies")
        return None
    return arr


def _build_rates(doc, space, errors):
    rd = doc.get("rates")
    if not isinstance(rd, dict):
        errors.append("rates: missing section")
        return None, None
    family = rd.get("family")
    if family not in FAMILY_PARAMS:
        errors.append(f"rates.family: must be one of {sorted(FAMILY_PARAMS)}, got {family!r}")
        return None, None
    needed = FAMILY_PARAMS[family]
    for key in rd:
        if key in SCHEMA["rates"] and key not in needed and key not in ("family", "truncation"):
            errors.append(f"rates.{key}: not a parameter of family {family}")
    args = {}
    ok = True
    for key in needed:
        if key not in rd:
            errors.append(f"rates.{key}: missing (required by {family})")
            ok = False
            continue
        if key == "w0":
            args[key] = _number(rd[key], "rates.w0", errors, positive=True)
        elif space is not None:
            args[key] = _parameter(rd[key], f"rates.{key}", space, errors)
        if args.get(key) is None:
            ok = False
    if not ok or space is None:
        return None, None
    ctor = {
        "logistic_paper": rates_mod.make_logistic_paper,
        "logistic_a2": rates_mod.make_logistic_a2,
        "ricker": rates_mod.make_ricker,
        "beverton_holt": rates_mod.make_beverton_holt,
    }[family]
    try:
        r = ctor(**args)
    except ConfigError as exc:
        errors.append(f"rates: {exc}")
        return None, None

    prof = None
    try:
        prof = profile(r, space)
    except BLGameError as exc:
        errors.append(f"rates: cannot compute carrying capacities: {exc}")
    trunc = rd.get("truncation", "auto")
    if trunc in (None, "none"):
        return r, prof
    if trunc == "auto":
        N = default_truncation(prof) if prof is not None else None
        return (rates_mod.truncate(r, N) if N is not None else r), prof
    N = _number(trunc, "rates.truncation", errors, positive=True)
    return (rates_mod.truncate(r, N) if N is not None else None), prof


def _build_kernel(doc, space, errors):
    kd = doc.get("kernel") or {"kind": "pure_selection"}
    kind = kd.get("kind", "pure_selection")
    if space is None:
        return None
    if kind == "pure_selection":
        return bl.make_pure_selection(space)
    if kind == "smoothed":
        bw = _number(kd.get("bandwidth"), "kernel.bandwidth", errors, positive=True)
        return bl.make_smoothed_kernel(space, bw) if bw is not None else None
    if kind == "explicit":
        try:
            mat = np.asarray(kd.get("matrix"), dtype=float)
        except (TypeError, ValueError):
            errors.append("kernel.matrix: not a numeric matrix")
            return None
        if mat.shape != (space.m, space.m):
            errors.append(f"kernel.matrix: shape {mat.shape}, expected ({space.m}, {space.m})")
            return None
        problems = bl.kernel_column_problems(mat)
        if problems:
            errors.extend(f"kernel.matrix: {p}" for p in problems)
            return None
        return bl.MutationKernel(mat, space)
    errors.append(f"kernel.kind: unknown kind {kind!r}")
    return None


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNARY = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "minimum": np.minimum,
    "maximum": np.maximum,
}


def eval_density(expression: str, points: np.ndarray) -> np.ndarray:
    """Evaluate an arithmetic expression in ``x0, x1, ...`` at every point.

    Only numbers, the coordinate names, ``pi``, arithmetic operators and the
    functions in ``_FUNCS`` are accepted.
    """
    names = {f"x{k}": points[:, k] for k in range(points.shape[1])}
    names["x"] = points[:, 0]
    names["pi"] = math.pi

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name) and node.id in names:
            return names[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNARY:
            return _UNARY[type(node.op)](ev(node.operand))
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS and not node.keywords:
            return _FUNCS[node.func.id](*[ev(a) for a in node.args])
        raise ConfigError(f"unsupported element in density expression: {ast.dump(node)[:60]}")

    tree = ast.parse(expression, mode="eval")
    values = np.broadcast_to(np.asarray(ev(tree), dtype=float), (points.shape[0],))
    return np.array(values)


def _build_initial(doc, space, errors):
    idoc = doc.get("initial")
    if not isinstance(idoc, dict):
        errors.append("initial: missing section")
        return None
    kind = idoc.get("kind")
    if space is None:
        return None
    m = space.m
    if kind == "uniform":
        mass = _number(idoc.get("mass", 1.0), "initial.mass", errors, positive=True)
        return bl.DiscreteMeasure(np.full(m, mass / m), space) if mass is not None else None
    if kind == "dirac":
        idx = _number(idoc.get("index"), "initial.index", errors, integer=True)
        mass = _number(idoc.get("mass", 1.0), "initial.mass", errors)
        if idx is None or mass is None:
            return None
        if not 0 <= idx < m:
            errors.append(f"initial.index: {idx} out of range for {m} strategies")
            return None
        return bl.DiscreteMeasure.dirac(space, idx, mass)
    if kind == "weights":
        w = _parameter(idoc.get("weights"), "initial.weights", space, errors)
        return bl.DiscreteMeasure(w, space) if w is not None else None
    if kind == "density":
        expr = idoc.get("expression")
        if not isinstance(expr, str):
            errors.append("initial.expression: expected a string")
            return None
        try:
            values = eval_density(expr, space.points)
        except (ConfigError, SyntaxError, ValueError, TypeError, ZeroDivisionError) as exc:
            errors.append(f"initial.expression: {exc}")
            return None
        if not np.all(np.isfinite(values)):
            errors.append("initial.expression: produced non-finite values")
            return None
        return bl.DiscreteMeasure.from_density(space, values)
    errors.append(f"initial.kind: must be uniform, dirac, weights or density, got {kind!r}")
    return None


def parse_config(source) -> ExperimentConfig:
    """Parse and validate a configuration; report every problem at once."""
    doc, text = load_document(source)
    errors: list = []
    _unknown_keys(doc, SCHEMA, "", errors)
    if not isinstance(doc, dict):
        raise ConfigValidationError(errors)
    for section in ("space", "rates", "initial", "integrator", "output"):
        if section not in doc and section not in DEFAULTS:
            errors.append(f"{section}: missing section")

    space = _build_space(doc, errors) if "space" in doc else None
    rates, prof = _build_rates(doc, space, errors) if "rates" in doc else (None, None)
    kernel = _build_kernel(doc, space, errors)
    initial = _build_initial(doc, space, errors) if "initial" in doc else None

    integ = {**DEFAULTS["integrator"], **(doc.get("integrator") or {})}
    scheme = integ.get("scheme")
    if scheme not in ("picard", "rk4"):
        errors.append(f"integrator.scheme: must be picard or rk4, got {scheme!r}")
    dt = _number(integ.get("dt"), "integrator.dt", errors, positive=True)
    if "T" not in integ:
        errors.append("integrator.T: missing")
        T = None
    else:
        T = _number(integ["T"], "integrator.T", errors)
        if T is not None and T < 0:
            errors.append("integrator.T: must be nonnegative")
    tol = _number(integ.get("tol"), "integrator.tol", errors, positive=True)
    max_iter = _number(integ.get("max_iter"), "integrator.max_iter", errors, positive=True, integer=True)
    substeps = _number(integ.get("substeps"), "integrator.substeps", errors, positive=True, integer=True)

    out = {**DEFAULTS["output"], **(doc.get("output") or {})}
    every = out.get("every", dt)
    every = _number(every, "output.every", errors, positive=True)
    if every is not None and dt is not None:
        ratio = every / dt
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            errors.append(f"output.every: {every} is not a positive multiple of dt={dt}")
    diagnostics = out.get("diagnostics")
    if not isinstance(diagnostics, list) or any(d not in DIAGNOSTIC_COLUMNS for d in diagnostics):
        errors.append(f"output.diagnostics: must be a list drawn from {list(DIAGNOSTIC_COLUMNS)}")
    target = out.get("target")
    target_index = None
    if target == "auto":
        target_index = prof.fittest if prof is not None else None
    elif target not in (None, "none"):
        target_index = _number(target, "output.target", errors, integer=True)
        if target_index is not None and space is not None and not 0 <= target_index < space.m:
            errors.append(f"output.target: {target_index} out of range")
    seed = _number(doc.get("seed", 0), "seed", errors, integer=True)

    if rates is not None and space is not None and rates.m != space.m:
        errors.append(f"rates: {rates.m} strategies but space has {space.m}")
    if scheme == "picard" and initial is not None and not initial.is_positive():
        errors.append("initial: the picard scheme needs nonnegative initial weights")
    if errors:
        raise ConfigValidationError(errors)
    return ExperimentConfig(
        raw=doc,
        space=space,
        rates=rates,
        kernel=kernel,
        initial=initial,
        scheme=scheme,
        dt=dt,
        T=T,
        tol=tol,
        max_iter=max_iter,
        substeps=substeps,
        every=every,
        out_dir=str(out.get("dir")),
        target=target_index,
        diagnostics=tuple(diagnostics),
        seed=seed,
        text=text,
        profile=prof,
    )


def set_path(doc: dict, path: str, value) -> dict:
    """Return a copy of ``doc`` with the dotted ``path`` set to ``value``."""
    doc = copy.deepcopy(doc)
    node = doc
    keys = path.split(".")
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: '{key}' is not a mapping")
    node[keys[-1]] = value
    return doc
