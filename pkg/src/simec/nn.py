"""Smooth feedforward networks: evaluation, exact Jacobians and JSON I/O.

A network is a chain of layers ``x -> act(W x + b)`` where every activation
is a smooth, strictly increasing scalar function applied componentwise.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .errors import ConfigError, InputShapeError


class Activation(enum.Enum):
    SIGMOID = "sigmoid"
    TANH = "tanh"
    SOFTPLUS = "softplus"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, name):
        if isinstance(name, Activation):
            return name
        key = str(name).strip().lower()
        if key == "relu":
            raise ConfigError(
                "relu is not smooth; use 'softplus' as a smooth stand-in")
        try:
            return cls(key)
        except ValueError:
            allowed = ", ".join(a.value for a in cls)
            raise ConfigError(
                f"unknown activation {name!r} (expected one of {allowed})") from None

    def __call__(self, z):
        return _VALUE[self](z)

    def derivative(self, z):
        return _DERIV[self](z)

    def value_and_derivative(self, z):
        return _PAIR[self](z)


def _sigmoid(z):
    return expit(np.asarray(z, dtype=np.float64))


def _sigmoid_prime(z):
    # s(z) s(-z) stays positive where s (1 - s) would round to zero
    z = np.asarray(z, dtype=np.float64)
    return expit(z) * expit(-z)


def _tanh_prime(z):
    e = np.exp(-2.0 * np.abs(np.asarray(z, dtype=np.float64)))
    return 4.0 * e / (1.0 + e) ** 2


def _softplus(z):
    return np.logaddexp(0.0, z)


_VALUE = {
    Activation.SIGMOID: _sigmoid,
    Activation.TANH: np.tanh,
    Activation.SOFTPLUS: _softplus,
    Activation.IDENTITY: lambda z: np.array(z, dtype=np.float64),
}

_DERIV = {
    Activation.SIGMOID: _sigmoid_prime,
    Activation.TANH: _tanh_prime,
    Activation.SOFTPLUS: _sigmoid,
    Activation.IDENTITY: lambda z: np.ones_like(np.asarray(z, dtype=np.float64)),
}


def _sigmoid_pair(z):
    s = expit(z)
    return s, s * expit(-z)


def _tanh_pair(z):
    return np.tanh(z), _tanh_prime(z)


_PAIR = {
    Activation.SIGMOID: _sigmoid_pair,
    Activation.TANH: _tanh_pair,
    Activation.SOFTPLUS: lambda z: (_softplus(z), expit(z)),
    Activation.IDENTITY: lambda z: (z, np.ones_like(z)),
}


def _frozen(a, ndim):
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise InputShapeError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    """Affine map followed by a componentwise activation.

    ``weights`` has shape ``(out, in)``; row ``r`` feeds output unit ``r``.
    """

    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.SIGMOID

    def __post_init__(self):
        w = _frozen(self.weights, 2)
        b = _frozen(self.bias, 1)
        if b.shape[0] != w.shape[0]:
            raise InputShapeError(
                f"bias length {b.shape[0]} does not match {w.shape[0]} weight rows")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", Activation.parse(self.activation))
        object.__setattr__(self, "_pair", _PAIR[self.activation])

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    def __call__(self, x):
        return self.activation(x @ self.weights.T + self.bias)


@dataclass(frozen=True, eq=False)
class MlpModel:
    layers: tuple

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ConfigError("a model needs at least one layer")
        for k in range(1, len(layers)):
            if layers[k].in_dim != layers[k - 1].out_dim:
                raise InputShapeError(
                    f"layer {k} expects {layers[k].in_dim} inputs but layer "
                    f"{k - 1} produces {layers[k - 1].out_dim}")
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    @property
    def widths(self):
        return [self.input_dim] + [layer.out_dim for layer in self.layers]

    def __call__(self, x):
        return forward(self, x)

    def to_dict(self):
        return {
            "layers": [
                {
                    "weights": layer.weights.tolist(),
                    "bias": layer.bias.tolist(),
                    "activation": layer.activation.value,
                }
                for layer in self.layers
            ]
        }

    @classmethod
    def from_dict(cls, data):
        try:
            specs = data["layers"]
        except (KeyError, TypeError):
            raise ConfigError("model JSON must be an object with a 'layers' list") from None
        layers = []
        for k, spec in enumerate(specs):
            try:
                layers.append(Layer(spec["weights"], spec["bias"],
                                    spec.get("activation", "sigmoid")))
            except KeyError as exc:
                raise ConfigError(f"layer {k} is missing {exc}") from None
        return cls(layers)


def save_model(model, path):
    Path(path).write_text(json.dumps(model.to_dict(), indent=1) + "\n")


def load_model(path):
    with open(path) as fh:
        return MlpModel.from_dict(json.load(fh))


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (model.input_dim,) or x.ndim > 2:
        raise InputShapeError(
            f"input of shape {x.shape} does not match input_dim {model.input_dim}")
    return x


def forward(model, x):
    """Evaluate the network at ``x`` (shape ``(d0,)`` or a batch ``(n, d0)``)."""
    a = _check_input(model, x)
    for layer in model.layers:
        a = layer(a)
    return a


def layer_jacobian(layer, x):
    """Jacobian ``diag(act'(W x + b)) W`` of a single layer at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.in_dim,):
        raise InputShapeError(f"layer expects {layer.in_dim} inputs, got shape {x.shape}")
    z = layer.weights @ x + layer.bias
    return layer.activation.derivative(z)[:, None] * layer.weights


def forward_and_jacobian(model, x):
    """Output and ``d_n x d_0`` Jacobian in one forward-mode sweep."""
    a = _check_input(model, x)
    if a.ndim != 1:
        raise InputShapeError("Jacobians are computed one point at a time")
    jac = None
    for layer in model.layers:
        a, da = layer._pair(layer.weights @ a + layer.bias)
        step = da[:, None] * layer.weights
        jac = step if jac is None else step @ jac
    return a, jac


def network_jacobian(model, x):
    return forward_and_jacobian(model, x)[1]


@dataclass(frozen=True)
class LayerRank:
    index: int
    sigma_min: float
    sigma_max: float
    passed: bool


@dataclass(frozen=True)
class RankReport:
    layers: tuple
    tol_ratio: float

    @property
    def passed(self):
        return all(r.passed for r in self.layers)


def check_full_rank(model, tol_ratio=1e-10):
    """Report per-layer singular-value ratios against ``tol_ratio``.

    Degenerate layers are reported, never raised.
    """
    if tol_ratio <= 0:
        raise ConfigError("tol_ratio must be positive")
    rows = []
    for k, layer in enumerate(model.layers):
        sv = np.linalg.svd(layer.weights, compute_uv=False)
        smax = float(sv[0]) if sv.size else 0.0
        smin = float(sv[-1]) if sv.size else 0.0
        ok = smax > 0 and smin / smax > tol_ratio
        rows.append(LayerRank(k, smin, smax, ok))
    return RankReport(tuple(rows), tol_ratio)
