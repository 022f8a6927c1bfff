import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from blgame.cli import main
from blgame.config import parse_config
from blgame.experiment import OUTPUT_ROOT_ENV, parse_axis, run_simulate, run_sweep
from blgame.errors import ConfigError
from blgame.verify import run_verify

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

SMALL = {
    "seed": 0,
    "space": {"grid": {"lo": [0.5, 0.5], "hi": [1.5, 1.5], "counts": [3, 3]}},
    "rates": {"family": "logistic_paper", "q1": "coord:0", "q2": "coord:1"},
    "initial": {"kind": "uniform"},
    "integrator": {"dt": 0.05, "T": 4.0},
    "output": {"every": 0.5, "dir": "small"},
}


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    return tmp_path


def write(tmp_path, doc, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(doc))
    return path


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_simulate_writes_outputs(tmp_path):
    assert main(["simulate", str(write(tmp_path, SMALL))]) == 0
    out = tmp_path / "small"
    rows = read_csv(out / "diagnostics.csv")
    assert rows[0] == [
        "t", "total_mass", "mean_0", "mean_1", "flat_distance_to_target", "min_weight", "constraint_residual",
    ]
    assert len(rows) == 1 + 9  # one row per 0.5 tick on [0, 4]
    traj = read_csv(out / "trajectory.csv")
    assert traj[0] == ["t"] + [f"w_{i}" for i in range(9)]
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == "ok" and manifest["dt_used"] == 0.05
    assert "numpy" in manifest["versions"] and manifest["wall_time_s"] >= 0
    # the echoed config reproduces the run on its own
    assert parse_config(manifest["config"]).T == 4.0


def test_simulate_is_byte_deterministic(tmp_path):
    cfg = parse_config(SMALL)
    run_simulate(cfg, tmp_path / "a")
    run_simulate(cfg, tmp_path / "b")
    for name in ("diagnostics.csv", "trajectory.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_csv_round_trips_bit_exact(tmp_path):
    cfg = parse_config(SMALL)
    res = run_simulate(cfg, tmp_path / "rt")
    rows = read_csv(tmp_path / "rt" / "trajectory.csv")[1:]
    values = np.array([[float(x) for x in row[1:]] for row in rows])
    stride = int(round(cfg.every / cfg.dt))
    assert np.array_equal(values, res.trajectory.weights[::stride])


def test_simulate_T_zero(tmp_path):
    doc = dict(SMALL, integrator={"dt": 0.05, "T": 0})
    res = run_simulate(parse_config(doc), tmp_path / "t0")
    rows = read_csv(tmp_path / "t0" / "diagnostics.csv")
    assert len(rows) == 2 and float(rows[1][0]) == 0.0
    assert np.array_equal(res.trajectory.weights[0], np.full(9, 1 / 9))


def test_residual_shrinks_with_dt(tmp_path):
    col = []
    for dt in (0.1, 0.05):
        doc = dict(SMALL, integrator={"dt": dt, "T": 4.0}, output={"every": 0.1})
        res = run_simulate(parse_config(doc), tmp_path / f"dt{dt}")
        header = read_csv(tmp_path / f"dt{dt}" / "diagnostics.csv")[0]
        k = header.index("constraint_residual")
        col.append(res.rows[10][k])  # t = 1.0
    assert 3 < col[0] / col[1] < 5


def test_dirac_convergence_diagnostics(tmp_path):
    doc = dict(SMALL, integrator={"dt": 0.05, "T": 60.0}, output={"every": 1.0})
    res = run_simulate(parse_config(doc), tmp_path / "dirac")
    header = read_csv(tmp_path / "dirac" / "diagnostics.csv")[0]
    dist = np.array([row[header.index("flat_distance_to_target")] for row in res.rows])
    tail = dist[len(dist) // 2 :]
    assert np.all(np.diff(tail) <= 0)
    assert dist[-1] < 1e-3


def test_step_failure_exit_code(tmp_path, capsys):
    doc = {
        "space": {"explicit": {"points": [[0.0]]}},
        "rates": {"family": "logistic_a2", "q1": 50, "q2": 50, "w0": 1},
        "initial": {"kind": "dirac", "index": 0, "mass": 10},
        "integrator": {"T": 1, "dt": 1.0, "max_iter": 3},
        "output": {"dir": "fail"},
    }
    assert main(["simulate", str(write(tmp_path, doc))]) == 2
    assert "t=0" in capsys.readouterr().err
    manifest = json.loads((tmp_path / "fail" / "manifest.json").read_text())
    assert manifest["status"] == "step_failure" and manifest["failed_at"] == 0.0


def test_retry_halves_dt(tmp_path):
    doc = {
        "space": {"explicit": {"points": [[0.0]]}},
        "rates": {"family": "logistic_a2", "q1": 3, "q2": 1, "w0": 1},
        "initial": {"kind": "dirac", "index": 0, "mass": 1},
        "integrator": {"T": 1, "dt": 0.5, "max_iter": 8},
        "output": {"every": 0.5, "dir": "retry"},
    }
    res = run_simulate(parse_config(doc), tmp_path / "retry")
    assert res.status == 0 and res.dt_used < 0.5


def test_validation_exit_code(tmp_path, capsys):
    doc = dict(SMALL, rates={"family": "logistic_paper", "q1": [1.0] * 8, "q2": 1.0})
    assert main(["simulate", str(write(tmp_path, doc))]) == 1
    assert "rates.q1" in capsys.readouterr().err
    assert main(["simulate", str(tmp_path / "missing.yaml")]) == 1


@pytest.mark.parametrize(
    "weights, expected",
    [([2.0, 3.0], 5.0), ([1.0], 1.0)],
)
def test_flatnorm_command(tmp_path, capsys, weights, expected):
    doc = {"points": [[float(i)] for i in range(len(weights))], "weights": weights}
    assert main(["flatnorm", str(write(tmp_path, doc, "m.yaml"))]) == 0
    value = float(capsys.readouterr().out.split()[1])
    assert value == pytest.approx(expected, abs=1e-12)


def test_flatnorm_oracle_mode(capsys):
    assert main(["flatnorm", "--oracle", str(CONFIGS / "dirac_pair.yaml")]) == 0
    lines = dict(line.split() for line in capsys.readouterr().out.splitlines())
    assert float(lines["flat_norm"]) == pytest.approx(float(lines["oracle"]), abs=1e-9)
    assert float(lines["flat_norm"]) == pytest.approx(2 / 3, abs=1e-12)


def test_sweep_sorted_and_deterministic(tmp_path):
    doc = dict(SMALL, rates={"family": "logistic_a2", "q1": "coord:0", "q2": "coord:1", "w0": 0.2})
    doc["kernel"] = {"kind": "smoothed", "bandwidth": 0.1}
    path = write(tmp_path, doc)
    rows, summary = run_sweep(path, "kernel.bandwidth=1.0,0.01,0.1", tmp_path / "sw1")
    assert [r["value"] for r in rows] == [0.01, 0.1, 1.0]
    table = read_csv(summary)
    assert table[0] == ["kernel.bandwidth", "status", "final_mass", "final_target_distance", "dissipative"]
    assert [row[0] for row in table[1:]] == ["0.01", "0.1", "1.0"]
    assert all(row[1] == "ok" for row in table[1:])
    _, again = run_sweep(path, "kernel.bandwidth=0.1,1.0,0.01", tmp_path / "sw2", workers=2)
    assert summary.read_bytes() == again.read_bytes()


def test_sweep_empty_axis(tmp_path):
    with pytest.raises(ConfigError):
        parse_axis("kernel.bandwidth=")
    assert main(["sweep", str(write(tmp_path, SMALL)), "--axis", "kernel.bandwidth="]) == 1


def test_verify_quick_suite_passes(capsys):
    assert main(["verify", "--suite", "quick", "--seed", "0"]) == 0
    assert "14/14 checks passed" in capsys.readouterr().out


def test_verify_broken_kernel_fault():
    report = run_verify("quick", 0, fault="broken-kernel")
    failed = [r.name for r in report.results if not r.passed]
    assert failed == ["bullet_mass_law"]
    assert main(["verify", "--suite", "quick", "--inject-fault", "broken-kernel"]) == 3


@pytest.mark.parametrize("seed", range(10))
def test_verify_seed_robustness(seed):
    report = run_verify("quick", seed)
    assert report.passed, report.format()


def test_verify_default_suite_is_green():
    report = run_verify("default", 0)
    assert report.passed, report.format()


def test_unknown_suite(capsys):
    assert main(["verify", "--suite", "nope"]) == 1


def test_example_configs_parse():
    for path in CONFIGS.glob("*.yaml"):
        if path.name != "dirac_pair.yaml":
            parse_config(path)
