import numpy as np
import pytest

from blgame.config import ConfigValidationError, eval_density, parse_config, set_path

MINIMAL = """
space:
  explicit: {points: [[1.0]]}
rates: {family: logistic_a2, q1: 2.0, q2: 1.0, w0: 1.0}
initial: {kind: dirac, index: 0, mass: 0.5}
integrator: {T: 1.0}
"""


def grid_doc(**over):
    doc = {
        "space": {"grid": {"lo": [0.5, 0.5], "hi": [1.5, 1.5], "counts": [5, 5]}},
        "rates": {"family": "logistic_paper", "q1": "coord:0", "q2": "coord:1"},
        "initial": {"kind": "uniform", "mass": 1.0},
        "integrator": {"T": 1.0, "dt": 0.1},
        "output": {"every": 0.5},
    }
    for path, value in over.items():
        doc = set_path(doc, path.replace("__", "."), value)
    return doc


def test_minimal_config_parses():
    cfg = parse_config(MINIMAL)
    assert cfg.space.m == 1
    assert cfg.rates.family == "logistic_a2"
    assert cfg.initial.weights.tolist() == [0.5]
    assert cfg.scheme == "picard" and cfg.dt == 0.01 and cfg.seed == 0
    assert cfg.rates.truncation_N == 2.0  # ceil(K_diamond) + 1 with K_diamond = 1
    assert cfg.target == 0


def test_kernel_column_sum_reported():
    doc = grid_doc()
    doc["space"] = {"explicit": {"points": [[0.0], [1.0]]}}
    doc["rates"]["q1"], doc["rates"]["q2"] = [1.0, 2.0], 1.0
    doc["kernel"] = {"kind": "explicit", "matrix": [[1.0, 0.4], [0.0, 0.5]]}
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(doc)
    assert any("kernel.matrix" in e and "column 1" in e and "0.9" in e for e in exc.value.errors)


def test_dimension_mismatch_has_path():
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(grid_doc(rates__q1=[1.0] * 24))
    assert exc.value.errors == ["rates.q1: has 24 entries but the space has 25 strategies"]


def test_all_errors_collected():
    doc = grid_doc(rates__q1=[1.0] * 24, integrator__dt=-1, output__colour="red")
    doc["extra"] = 1
    with pytest.raises(ConfigValidationError) as exc:
        parse_config(doc)
    joined = "\n".join(exc.value.errors)
    for needle in ("extra: unknown key", "output.colour: unknown key", "rates.q1", "integrator.dt"):
        assert needle in joined


def test_family_specific_keys():
    with pytest.raises(ConfigValidationError, match="rates.w0: not a parameter of family logistic_paper"):
        parse_config(grid_doc(rates__w0=1.0))
    with pytest.raises(ConfigValidationError, match="rates.w0: missing"):
        parse_config(grid_doc(rates__family="logistic_a2"))


def test_every_must_be_multiple_of_dt():
    with pytest.raises(ConfigValidationError, match="output.every"):
        parse_config(grid_doc(output__every=0.25))


def test_picard_needs_nonnegative_initial():
    doc = grid_doc()
    doc["initial"] = {"kind": "weights", "weights": [1.0] * 24 + [-1.0]}
    with pytest.raises(ConfigValidationError, match="picard"):
        parse_config(doc)
    doc["integrator"]["scheme"] = "rk4"
    assert parse_config(doc).initial.weights[-1] == -1.0


def test_target_and_profile():
    cfg = parse_config(grid_doc())
    assert cfg.space.points[cfg.target].tolist() == [1.5, 0.5]
    assert cfg.rates.truncation_N == 4.0
    assert parse_config(grid_doc(output__target="none")).target is None
    assert parse_config(grid_doc(output__target=3)).target == 3


def test_density_initial():
    cfg = parse_config(grid_doc(initial={"kind": "density", "expression": "x0 * exp(-x1)"}))
    pts = cfg.space.points
    assert np.allclose(cfg.initial.weights, pts[:, 0] * np.exp(-pts[:, 1]) * cfg.space.quad_weights)


def test_density_rejects_code():
    pts = np.zeros((2, 1))
    with pytest.raises(Exception):
        eval_density("__import__('os').getcwd()", pts)
    with pytest.raises(ConfigValidationError, match="initial.expression"):
        parse_config(grid_doc(initial={"kind": "density", "expression": "open('x')"}))


def test_smoothed_kernel_config():
    cfg = parse_config(grid_doc(kernel={"kind": "smoothed", "bandwidth": 0.3}))
    assert np.allclose(cfg.kernel.columns.sum(axis=0), 1.0)
    with pytest.raises(ConfigValidationError, match="kernel.bandwidth"):
        parse_config(grid_doc(kernel={"kind": "smoothed", "bandwidth": 0}))


def test_yaml_syntax_error():
    with pytest.raises(ConfigValidationError, match="YAML"):
        parse_config("space: [unclosed\n")


def test_set_path_copies():
    doc = grid_doc()
    new = set_path(doc, "kernel.bandwidth", 0.1)
    assert "kernel" not in doc and new["kernel"]["bandwidth"] == 0.1
