import json
import math

import numpy as np
import pytest

from simec.errors import ConfigError, InputShapeError
from simec.explorer import (
    BOUNDARY,
    MAX_STEPS,
    REACHED,
    ExploreConfig,
    preimage_interval,
    simexp_step,
    write_foliation,
)
from simec.nn import Layer, MlpModel, forward
from simec.metric import pullback_metric, spectral_decompose
from simec.oracle import GridSpec, coverage_fraction, grid_preimage
from simec.tracer import HALT, TraceConfig, read_trace_csv

UNIT = ((0.0, 1.0), (0.0, 1.0))


def strip_config(**kw):
    base = dict(delta=1e-3, tol_eps=0.1, leaf_eps=0.01, max_leaf_steps=3000,
                simec=TraceConfig(1e-3, 3000, HALT, UNIT))
    base.update(kw)
    return ExploreConfig(**base)


def test_config_rejects_leaf_eps_not_below_tol():
    with pytest.raises(ConfigError):
        strip_config(tol_eps=0.01, leaf_eps=0.05)
    with pytest.raises(ConfigError):
        strip_config(tol_eps=0.05, leaf_eps=0.05)
    with pytest.raises(ConfigError):
        strip_config(delta=0.0)


def test_linear_pullback_and_positive_direction(linear_model):
    g = pullback_metric(linear_model, [0.0, 0.0])
    np.testing.assert_array_equal(g.matrix, [[1.0, 2.0], [2.0, 4.0]])
    d = spectral_decompose(g)
    assert d.lambda_max == pytest.approx(5.0, rel=1e-14)


def test_simexp_linear_step_count(linear_model):
    delta, leaf_eps = 1e-3, 0.05
    step = simexp_step(linear_model, [0.0, 0.0], None, delta, leaf_eps, 10_000)
    assert step.status == REACHED
    assert step.steps == math.ceil(leaf_eps / (delta * math.sqrt(5)))
    np.testing.assert_allclose(step.direction, np.array([1.0, 2.0]) / math.sqrt(5), atol=1e-14)
    assert step.output == pytest.approx(step.steps * delta * math.sqrt(5), rel=1e-12)
    assert step.length == pytest.approx(step.steps * delta, rel=1e-12)


def test_simexp_zero_leaf_eps_returns_immediately(linear_model):
    step = simexp_step(linear_model, [0.3, 0.3], None, 1e-3, 0.0, 100)
    assert step.steps == 0
    np.testing.assert_array_equal(step.point, [0.3, 0.3])
    assert step.reached


def test_simexp_reports_exhausted_budget(linear_model):
    step = simexp_step(linear_model, [0.0, 0.0], None, 1e-3, 1.0, 5)
    assert step.status == MAX_STEPS and not step.reached and step.steps == 5


def test_simexp_reports_boundary(linear_model):
    cfg = TraceConfig(1e-2, 0, HALT, UNIT)
    step = simexp_step(linear_model, [0.9, 0.9], None, 1e-2, 1.0, 1000, cfg)
    assert step.status == BOUNDARY
    assert np.all(step.point <= 1.0)


def test_simexp_follows_prev_direction(linear_model):
    back = -np.array([1.0, 2.0]) / math.sqrt(5)
    step = simexp_step(linear_model, [0.5, 0.5], back, 1e-3, 0.01, 1000)
    assert step.output < step.start_output
    assert step.direction @ back > 0


def test_simexp_fixed_direction(circle_model):
    a = simexp_step(circle_model, [0.2, 0.2], None, 1e-3, 0.01, 10_000, refresh_direction=False)
    d = np.diff(a.path, axis=0)
    np.testing.assert_allclose(d, np.broadcast_to(d[0], d.shape), atol=1e-15)


def test_simexp_needs_scalar_output(example3_model):
    with pytest.raises(InputShapeError):
        simexp_step(example3_model, [0, 0, 0], None, 1e-3, 0.1, 10)


def test_simexp_circle_overshoot_bound(circle_model):
    delta = 1e-4
    step = simexp_step(circle_model, [0.2, 0.2], None, delta, 0.01, 100_000)
    lam_max = max(spectral_decompose(pullback_metric(circle_model, p)).lambda_max
                  for p in step.path[::50])
    offset = abs(step.output - step.start_output)
    assert 0.01 <= offset <= 0.01 + 5 * delta * math.sqrt(lam_max)


@pytest.fixture(scope="module")
def strip_result():
    model = MlpModel([Layer([[1.0, 2.0]], [0.0], "identity")])
    return model, preimage_interval(model, [0.5, 0.5], strip_config())


def test_strip_leaves_stay_in_band(strip_result):
    _, res = strip_result
    v = res.vertices()
    assert np.max(np.abs(v[:, 0] + 2 * v[:, 1] - 1.5)) <= 0.1 + 1e-3
    assert res.center_output == pytest.approx(1.5)
    lo, hi = res.covered_interval
    assert 1.4 - 1e-3 <= lo <= hi <= 1.6 + 1e-3


def test_strip_coverage(strip_result):
    _, res = strip_result
    grid = GridSpec(UNIT, 128)
    targets = grid_preimage(lambda p: p[:, 0] + 2 * p[:, 1], grid, (1.4, 1.6))
    assert coverage_fraction(targets, res.vertices(), 2 * res.leaf_spacing()) >= 0.9


def test_strip_transversal_monotone(strip_result):
    model, res = strip_result
    outs = forward(model, res.transversal_points)[:, 0]
    plus = np.concatenate([outs[:1], outs[res.transversal_side > 0][1:]])
    minus = np.concatenate([outs[:1], outs[res.transversal_side < 0]])
    assert np.all(np.diff(plus) > 0)
    assert np.all(np.diff(minus) < 0)


def test_start_leaf_appears_once(strip_result):
    _, res = strip_result
    hits = np.all(res.transversal_points == [0.5, 0.5], axis=1)
    assert np.count_nonzero(hits) == 1
    assert set(res.stop_reasons) == {1, -1}


def test_parallel_leaves_match_serial(strip_result):
    model, res = strip_result
    par = preimage_interval(model, [0.5, 0.5], strip_config(), jobs=4)
    assert len(par.leaves) == len(res.leaves)
    for a, b in zip(par.leaves, res.leaves):
        np.testing.assert_array_equal(a.points, b.points)


def test_preimage_rejects_start_outside(linear_model):
    with pytest.raises(ConfigError):
        preimage_interval(linear_model, [1.5, 0.5], strip_config())


def test_allow_outside_continues_transversal(linear_model):
    # from near the top edge the +w pass would halt at once without the flag
    cfg = strip_config(allow_outside=True)
    res = preimage_interval(linear_model, [0.5, 0.97], cfg)
    assert np.any(res.transversal_points[:, 1] > 1.0)
    inside = [leaf for leaf, p in zip(res.leaves, res.transversal_points) if p[1] <= 1.0]
    for leaf in inside:
        assert np.all(leaf.points <= 1.0)
    plain = preimage_interval(linear_model, [0.5, 0.97], strip_config())
    assert len(res.leaves) > len(plain.leaves)


def test_annulus_coverage_and_band(circle_model):
    cfg = ExploreConfig(1e-3, 0.05, 0.005, 20_000, TraceConfig(1e-3, 2000, HALT, UNIT))
    res = preimage_interval(circle_model, [0.2, 0.2], cfg)
    c = res.center_output
    outs = np.concatenate([leaf.outputs[:, 0] for leaf in res.leaves])
    assert np.all(np.abs(outs - c) <= 0.05 + 1e-3)
    grid = GridSpec(UNIT, 128)
    targets = grid_preimage(lambda p: forward(circle_model, p)[:, 0], grid, (c - 0.05, c + 0.05))
    assert coverage_fraction(targets, res.vertices(), 2 * res.leaf_spacing()) >= 0.9


def test_write_foliation(tmp_path, strip_result):
    _, res = strip_result
    cfg = strip_config()
    (tmp_path / "manifest.json").write_text(json.dumps({"subcommand": "foliate"}))
    write_foliation(res, tmp_path, cfg, {"start": [0.5, 0.5]})
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["subcommand"] == "foliate"
    assert manifest["n_leaves"] == len(res.leaves)
    assert manifest["tol_eps"] == 0.1 and manifest["boundary"] == "halt"
    assert len(list(tmp_path.glob("leaf_*.csv"))) == len(res.leaves)
    cols = read_trace_csv(tmp_path / "transversal.csv")
    np.testing.assert_array_equal(cols["x_0"], res.transversal_points[:, 0])
