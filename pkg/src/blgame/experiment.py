"""Run orchestration: simulate, write CSVs and manifests, parameter sweeps.

Each run owns its output directory, which receives

``trajectory.csv``
    ``t, w_0, ..., w_{m-1}`` at every output tick;
``diagnostics.csv``
    ``t, total_mass, mean_0..mean_{n-1}, flat_distance_to_target,
    min_weight, constraint_residual`` (unrequested columns are dropped,
    the order never changes; empty cells mean "not defined here");
``manifest.json``
    config echo, versions, timing, the dt actually used.

Floats are written with 17 significant digits, so files round-trip
bit-exactly and identical configs give byte-identical CSVs.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .asymptotics import dissipativity_check
from .bl import DiscreteMeasure, flat_norm
from .config import ExperimentConfig, load_document, parse_config, set_path
from .dynamics import Trajectory, evolve
from .errors import ConfigError, StepFailure

log = logging.getLogger(__name__)

OUTPUT_ROOT_ENV = "BLGAME_OUTPUT_ROOT"
MAX_RETRIES = 4
SWEEP_SLACK = 0.01


def fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.17g}"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def flat_distance_to_dirac(mu: DiscreteMeasure, index: int) -> float:
    """Flat distance between the strategy distribution ``mu / mu(1)`` and ``delta_index``.

    The difference is assembled so that its target entry is minus the sum
    of the others; this keeps late-time values (all tiny) free of
    cancellation noise.
    """
    w = np.asarray(mu.weights, dtype=float)
    mass = w.sum()
    if not mass > 0:
        return math.nan
    p = w / mass
    diff = p.copy()
    others = np.delete(p, index)
    diff[index] = -others.sum()
    return flat_norm(DiscreteMeasure(diff, mu.space))


@dataclass
class SimulationResult:
    status: int
    out_dir: Path
    trajectory: Optional[Trajectory] = None
    rows: list = field(default_factory=list)
    dt_used: Optional[float] = None
    message: str = ""


def diagnostics_rows(traj: Trajectory, cfg: ExperimentConfig) -> tuple:
    """Header and rows of the diagnostics table at every output tick."""
    stride = max(1, int(round(cfg.every / traj.dt))) if traj.dt > 0 else 1
    n = len(traj)
    ticks = list(range(0, n, stride))
    if ticks[-1] != n - 1:
        ticks.append(n - 1)
    want = set(cfg.diagnostics)
    space = traj.space
    header = ["t"]
    if "total_mass" in want:
        header.append("total_mass")
    if "mean_strategy" in want:
        header += [f"mean_{k}" for k in range(space.dim)]
    if "flat_distance_to_target" in want:
        header.append("flat_distance_to_target")
    if "min_weight" in want:
        header.append("min_weight")
    if "constraint_residual" in want:
        header.append("constraint_residual")

    ones = np.ones(space.m)
    G = traj.gamma.columns
    rows = []
    for k in ticks:
        w = traj.weights[k]
        mass = float(w.sum())
        row = [traj.times[k]]
        if "total_mass" in want:
            row.append(mass)
        if "mean_strategy" in want:
            mean = (w @ space.points) / mass if mass != 0 else np.full(space.dim, math.nan)
            row += list(mean)
        if "flat_distance_to_target" in want:
            row.append(flat_distance_to_dirac(traj.state(k), cfg.target) if cfg.target is not None else math.nan)
        if "min_weight" in want:
            row.append(float(w.min()))
        if "constraint_residual" in want:
            if 0 < k < n - 1 and abs((traj.times[k + 1] - traj.times[k]) - (traj.times[k] - traj.times[k - 1])) < 1e-12:
                slope = (traj.weights[k + 1].sum() - traj.weights[k - 1].sum()) / (traj.times[k + 1] - traj.times[k - 1])
                X = mass
                field_mass = float((G @ (traj.rates.birth(X) * w) - traj.rates.death(X) * w) @ ones)
                row.append(abs(slope - field_mass))
            else:
                row.append(math.nan)
        rows.append(row)
    return header, rows, ticks


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    path.write_text(buf.getvalue())


def versions() -> dict:
    return {
        "blgame": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "yaml": yaml.__version__,
        "platform": platform.platform(),
    }


def resolve_out_dir(cfg: ExperimentConfig, out_dir=None) -> Path:
    if out_dir is not None:
        return Path(out_dir)
    d = Path(cfg.out_dir)
    return d if d.is_absolute() else output_root() / d


def run_simulate(cfg: ExperimentConfig, out_dir=None) -> SimulationResult:
    """Integrate ``cfg`` and write its output directory.

    On step failure the whole run is retried with ``dt / 2``, at most four
    times.  Returns status 0 on success and 2 on failure.
    """
    out = resolve_out_dir(cfg, out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    dt = cfg.dt
    traj = None
    failure = None
    for attempt in range(MAX_RETRIES + 1):
        try:
            traj = evolve(
                cfg.initial, cfg.kernel, cfg.rates, cfg.T, cfg.scheme, dt, cfg.tol, cfg.max_iter, cfg.substeps
            )
            break
        except StepFailure as exc:
            failure = exc
            log.warning("attempt %d with dt=%g failed: %s", attempt + 1, dt, exc)
            dt /= 2.0
    wall = time.perf_counter() - started

    manifest = {
        "config": cfg.echo(),
        "config_text": cfg.text,
        "seed": cfg.seed,
        "versions": versions(),
        "wall_time_s": wall,
        "dt_requested": cfg.dt,
    }
    if traj is None:
        manifest.update(status="step_failure", failed_at=failure.t, error=str(failure))
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
        return SimulationResult(2, out, message=f"step failure at t={failure.t}: {failure}")

    header, rows, ticks = diagnostics_rows(traj, cfg)
    _write_csv(out / "diagnostics.csv", header, rows)
    traj_rows = [[traj.times[k], *traj.weights[k]] for k in ticks]
    _write_csv(out / "trajectory.csv", ["t"] + [f"w_{i}" for i in range(traj.space.m)], traj_rows)
    manifest.update(
        status="ok",
        dt_used=traj.dt,
        steps=len(traj) - 1,
        files=["diagnostics.csv", "trajectory.csv", "manifest.json"],
        target_index=cfg.target,
    )
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return SimulationResult(0, out, traj, rows, traj.dt)


# ---------------------------------------------------------------------------
# flat-norm input


def parse_flatnorm_input(source) -> DiscreteMeasure:
    """Measure from YAML/JSON ``{points: [...], weights: [...], metric?, matrix?}``."""
    from .space import build_explicit

    doc, _ = load_document(source)
    if not isinstance(doc, dict) or "points" not in doc or "weights" not in doc:
        raise ConfigError("flatnorm input needs 'points' and 'weights'")
    unknown = set(doc) - {"points", "weights", "metric", "matrix"}
    if unknown:
        raise ConfigError(f"unknown keys in flatnorm input: {sorted(unknown)}")
    space = build_explicit(doc["points"], metric=doc.get("metric", "euclidean"), matrix=doc.get("matrix"))
    return DiscreteMeasure(np.asarray(doc["weights"], dtype=float), space)


# ---------------------------------------------------------------------------
# sweeps


def parse_axis(spec: str) -> tuple:
    if "=" not in spec:
        raise ConfigError(f"axis must look like path=v1,v2,..., got {spec!r}")
    path, values = spec.split("=", 1)
    items = [v.strip() for v in values.split(",") if v.strip()]
    if not path.strip() or not items:
        raise ConfigError("sweep axis is empty")
    return path.strip(), [yaml.safe_load(v) for v in items]


def _sweep_one(job) -> dict:
    doc, path, value, out_dir = job
    row = {"value": value}
    try:
        cfg = parse_config(set_path(doc, path, value))
    except ConfigError as exc:
        row.update(status="invalid", error=str(exc))
        return row
    res = run_simulate(cfg, out_dir)
    row["status"] = "ok" if res.status == 0 else "step_failure"
    if res.trajectory is None:
        return row
    traj = res.trajectory
    row["final_mass"] = float(traj.masses[-1])
    row["final_target_distance"] = (
        flat_distance_to_dirac(traj.final, cfg.target) if cfg.target is not None else math.nan
    )
    if cfg.profile is not None and cfg.profile.defined:
        rep = dissipativity_check(traj, cfg.profile, slack=SWEEP_SLACK)
        row["dissipative"] = "pass" if rep.passed else "fail"
    else:
        row["dissipative"] = "n/a"
    return row


def _sort_key(value):
    return (0, float(value), "") if isinstance(value, (int, float)) and not isinstance(value, bool) else (1, 0.0, str(value))


def run_sweep(source, axis: str, out_dir=None, workers: Optional[int] = None) -> tuple:
    """Run one simulation per axis value, in parallel; write ``summary.csv``.

    Returns ``(rows, summary_path)``; rows are sorted by axis value.
    """
    doc, _ = load_document(source)
    path, values = parse_axis(axis)
    root = Path(out_dir) if out_dir is not None else output_root() / str(doc.get("output", {}).get("dir", "sweep"))
    root.mkdir(parents=True, exist_ok=True)
    values = sorted(values, key=_sort_key)
    jobs = [(doc, path, v, root / f"{path}={v}") for v in values]
    n_workers = min(len(jobs), workers or os.cpu_count() or 1)
    if n_workers <= 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n_workers) as pool:
            rows = list(pool.map(_sweep_one, jobs))
    header = [path, "status", "final_mass", "final_target_distance", "dissipative"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [
                row["value"],
                row.get("status", ""),
                fmt(row.get("final_mass")),
                fmt(row.get("final_target_distance")),
                row.get("dissipative", ""),
            ]
        )
    summary = root / "summary.csv"
    summary.write_text(buf.getvalue())
    return rows, summary
