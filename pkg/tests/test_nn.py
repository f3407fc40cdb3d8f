import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simec.errors import ConfigError, InputShapeError
from simec.nn import (
    Activation,
    Layer,
    MlpModel,
    check_full_rank,
    forward,
    layer_jacobian,
    load_model,
    network_jacobian,
    save_model,
)
from simec.oracle import fd_jacobian


def random_model(widths, rng, activation="sigmoid", scale=1.0):
    return MlpModel([
        Layer(scale * rng.normal(size=(b, a)), rng.normal(size=b), activation)
        for a, b in zip(widths[:-1], widths[1:])
    ])


def test_forward_example3(example3_model):
    np.testing.assert_array_equal(forward(example3_model, [1.0, 0.0, 0.0]), [1.0, 3.0])


def test_forward_identity_and_sigmoid():
    ident = MlpModel([Layer(np.eye(2), [0.0, 0.0], "identity")])
    np.testing.assert_array_equal(forward(ident, [0.3, -0.7]), [0.3, -0.7])
    sig = MlpModel([Layer([[1.0]], [0.0], "sigmoid")])
    assert forward(sig, [0.0])[0] == 0.5


def test_forward_rejects_wrong_shape(example3_model):
    with pytest.raises(InputShapeError):
        forward(example3_model, [1.0, 2.0])


def test_batch_forward_matches_pointwise(rng):
    model = random_model([2, 5, 5, 1], rng)
    pts = rng.uniform(-1, 1, size=(20, 2))
    batch = forward(model, pts)
    for p, out in zip(pts, batch):
        np.testing.assert_allclose(forward(model, p), out, rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize("act", list(Activation))
def test_activation_derivative_positive(act):
    z = np.linspace(-30, 30, 601)
    assert np.all(act.derivative(z) > 0)
    np.testing.assert_allclose(act.derivative(z[::50]),
                               [fd_jacobian(lambda t: act(t), [x])[0, 0] for x in z[::50]],
                               rtol=1e-6, atol=1e-10)


def test_relu_rejected():
    with pytest.raises(ConfigError, match="softplus"):
        Layer([[1.0]], [0.0], "relu")
    with pytest.raises(ConfigError):
        MlpModel.from_dict({"layers": [{"weights": [[1.0]], "bias": [0.0], "activation": "relu"}]})


def test_layer_jacobian_identity_is_weights(rng):
    w = rng.normal(size=(3, 4))
    layer = Layer(w, rng.normal(size=3), "identity")
    np.testing.assert_array_equal(layer_jacobian(layer, rng.normal(size=4)), w)


def test_layer_jacobian_sigmoid_at_zero():
    layer = Layer([[1.0]], [0.0], "sigmoid")
    np.testing.assert_array_equal(layer_jacobian(layer, [0.0]), [[0.25]])


@pytest.mark.parametrize("act", ["sigmoid", "tanh", "softplus"])
def test_layer_jacobian_matches_fd(rng, act):
    layer = Layer(rng.normal(size=(4, 3)), rng.normal(size=4), act)
    x = rng.normal(size=3)
    jac = layer_jacobian(layer, x)
    fd = fd_jacobian(lambda p: layer(p), x)
    assert np.max(np.abs(jac - fd)) <= 1e-6 * np.max(np.abs(jac))


def test_network_jacobian_linear_composition(rng):
    a1, a2 = rng.normal(size=(4, 3)), rng.normal(size=(2, 4))
    model = MlpModel([Layer(a1, np.zeros(4), "identity"), Layer(a2, np.zeros(2), "identity")])
    for _ in range(3):
        np.testing.assert_allclose(network_jacobian(model, rng.normal(size=3)), a2 @ a1,
                                   rtol=1e-14, atol=1e-14)


def test_network_jacobian_example3(example3_model, rng):
    for _ in range(3):
        np.testing.assert_array_equal(network_jacobian(example3_model, rng.normal(size=3)),
                                      [[1, 2, 2], [3, 1, 5]])


def test_network_jacobian_trained_net_matches_fd(circle_model, rng):
    pts = rng.uniform(-1, 1, size=(100, 2))
    worst = 0.0
    for p in pts:
        jac = network_jacobian(circle_model, p)
        fd = fd_jacobian(lambda x: forward(circle_model, x), p)
        worst = max(worst, np.max(np.abs(jac - fd)) / np.max(np.abs(jac)))
    assert worst <= 1e-6


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       widths=st.lists(st.integers(1, 6), min_size=2, max_size=5),
       act=st.sampled_from(["sigmoid", "tanh", "softplus"]))
def test_network_jacobian_matches_fd_property(seed, widths, act):
    rng = np.random.default_rng(seed)
    model = random_model(widths, rng, act, scale=0.8)
    x = rng.uniform(-1, 1, size=widths[0])
    jac = network_jacobian(model, x)
    fd = fd_jacobian(lambda p: forward(model, p), x)
    scale = max(np.max(np.abs(jac)), 1e-3)
    assert np.max(np.abs(jac - fd)) <= 1e-6 * scale


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_identity_network_is_affine(seed):
    rng = np.random.default_rng(seed)
    model = random_model([3, 4, 2], rng, "identity")
    x, y = rng.normal(size=3), rng.normal(size=3)
    a, b = rng.normal(size=2)
    f0 = forward(model, np.zeros(3))
    lin = lambda v: forward(model, v) - f0  # noqa: E731
    np.testing.assert_allclose(lin(a * x + b * y), a * lin(x) + b * lin(y), atol=1e-12)


def test_forward_and_jacobian_are_pure(circle_model):
    x = np.array([0.1, -0.3])
    assert np.array_equal(forward(circle_model, x), forward(circle_model, x))
    assert np.array_equal(network_jacobian(circle_model, x), network_jacobian(circle_model, x))
    with pytest.raises(ValueError):
        circle_model.layers[0].weights[0, 0] = 1.0


def test_chaining_validated():
    with pytest.raises(InputShapeError):
        MlpModel([Layer(np.ones((3, 2)), np.zeros(3)), Layer(np.ones((1, 2)), np.zeros(1))])
    with pytest.raises(ConfigError):
        MlpModel([])


def test_full_rank_report():
    ok = check_full_rank(MlpModel([Layer([[1, 2, 2], [3, 1, 5]], [0, 0], "identity")]))
    assert ok.passed
    assert not check_full_rank(MlpModel([Layer([[1, 1], [1, 1]], [0, 0])])).passed
    tiny = check_full_rank(MlpModel([Layer([[1, 0], [0, 1e-15]], [0, 0])]), tol_ratio=1e-10)
    assert not tiny.passed
    assert tiny.layers[0].sigma_min == pytest.approx(1e-15)


def test_json_round_trip(tmp_path, circle_model):
    path = tmp_path / "m.json"
    save_model(circle_model, path)
    again = load_model(path)
    x = np.array([0.3, 0.4])
    assert np.array_equal(forward(again, x), forward(circle_model, x))
    data = json.loads(path.read_text())
    assert data["layers"][0]["activation"] == "sigmoid"
    assert len(data["layers"][0]["weights"]) == 5


def test_loader_rejects_bad_chain(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"layers": [
        {"weights": [[1, 2]], "bias": [0], "activation": "tanh"},
        {"weights": [[1, 2]], "bias": [0], "activation": "tanh"},
    ]}))
    with pytest.raises(InputShapeError):
        load_model(path)
