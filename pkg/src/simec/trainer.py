"""Synthetic datasets and a small deterministic Adam trainer for smooth MLPs."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, InputShapeError, TrainingDivergedError
from .nn import Activation, Layer, MlpModel

GAS_CONSTANT = 8.314462
GAS_MOLES = 1.0
GAS_VOLUME = (2.5e-2, 7.5e-2)  # m^3
GAS_PRESSURE = (1e5, 2e5)  # Pa

DATASET_KINDS = ("circle_exp", "parabola_exp", "ideal_gas", "sine_classifier")

# training boxes, in the (possibly normalized) input coordinates the model sees
INPUT_BOXES = {
    "circle_exp": ((-1.0, 1.0), (-1.0, 1.0)),
    "parabola_exp": ((0.0, 1.0), (0.0, 1.0)),
    "ideal_gas": ((0.0, 1.0), (0.0, 1.0)),
    "sine_classifier": ((-math.pi, math.pi), (-1.0, 1.0)),
}


@dataclass(eq=False)
class Dataset:
    """Paired inputs/targets; ``normalization`` holds ``(min, max)`` per column.

    Columns are numbered inputs first, then targets. An empty list means the
    data are in their original units.
    """

    inputs: np.ndarray
    targets: np.ndarray
    normalization: list = field(default_factory=list)
    kind: Optional[str] = None

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.targets.ndim == 1:
            self.targets = self.targets[:, None]
        if len(self.inputs) != len(self.targets):
            raise InputShapeError(
                f"{len(self.inputs)} inputs but {len(self.targets)} targets")

    def __len__(self):
        return len(self.inputs)

    def __getitem__(self, idx):
        return Dataset(self.inputs[idx], self.targets[idx], self.normalization, self.kind)

    def split(self, fraction):
        """First ``fraction`` of the samples (generation order) and the rest."""
        if not 0 < fraction < 1:
            raise ConfigError("split fraction must lie strictly between 0 and 1")
        n = int(round(len(self) * fraction))
        return self[:n], self[n:]


def generate_dataset(kind, n, seed):
    """Sample one of the four experiment datasets with a seeded generator."""
    if n < 1:
        raise ConfigError("dataset size must be positive")
    rng = np.random.default_rng(seed)
    if kind == "circle_exp":
        xy = rng.uniform(-1.0, 1.0, size=(n, 2))
        z = np.exp(xy[:, 0] ** 2 + xy[:, 1] ** 2 - 2.0)
        return Dataset(xy, z, kind=kind)
    if kind == "parabola_exp":
        xy = rng.uniform(0.0, 1.0, size=(n, 2))
        z = np.exp(xy[:, 0] ** 2 + xy[:, 1] - 2.0)
        return Dataset(xy, z, kind=kind)
    if kind == "ideal_gas":
        v = rng.uniform(*GAS_VOLUME, size=n)
        p = rng.uniform(*GAS_PRESSURE, size=n)
        t = ideal_gas_temperature(v, p)
        raw = Dataset(np.column_stack([v, p]), t, kind=kind)
        return normalize(raw, ranges=ideal_gas_ranges())
    if kind == "sine_classifier":
        x = rng.uniform(-math.pi, math.pi, size=n)
        y = rng.uniform(-1.0, 1.0, size=n)
        z = (y >= np.sin(x)).astype(np.float64)
        return Dataset(np.column_stack([x, y]), z, kind=kind)
    raise ConfigError(f"unknown dataset kind {kind!r} (expected one of {', '.join(DATASET_KINDS)})")


def ideal_gas_temperature(volume, pressure, moles=GAS_MOLES):
    return np.asarray(pressure) * np.asarray(volume) / (moles * GAS_CONSTANT)


def ideal_gas_ranges():
    """``(min, max)`` of volume, pressure and temperature over the sampling box."""
    t_lo = ideal_gas_temperature(GAS_VOLUME[0], GAS_PRESSURE[0])
    t_hi = ideal_gas_temperature(GAS_VOLUME[1], GAS_PRESSURE[1])
    return [GAS_VOLUME, GAS_PRESSURE, (float(t_lo), float(t_hi))]


def normalize(data, ranges=None):
    """Min-max map every column to [0, 1], recording the ranges used.

    Already normalized data are returned unchanged.
    """
    if data.normalization:
        return data
    cols = np.column_stack([data.inputs, data.targets])
    if ranges is None:
        lo, hi = cols.min(axis=0), cols.max(axis=0)
    else:
        lo = np.array([r[0] for r in ranges], dtype=np.float64)
        hi = np.array([r[1] for r in ranges], dtype=np.float64)
    if np.any(hi <= lo):
        bad = np.nonzero(hi <= lo)[0].tolist()
        raise ConfigError(f"cannot normalize constant column(s) {bad}")
    scaled = (cols - lo) / (hi - lo)
    d = data.inputs.shape[1]
    return Dataset(scaled[:, :d], scaled[:, d:],
                   [(float(a), float(b)) for a, b in zip(lo, hi)], data.kind)


def denormalize(data):
    if not data.normalization:
        return data
    lo = np.array([r[0] for r in data.normalization])
    hi = np.array([r[1] for r in data.normalization])
    cols = np.column_stack([data.inputs, data.targets]) * (hi - lo) + lo
    d = data.inputs.shape[1]
    return Dataset(cols[:, :d], cols[:, d:], [], data.kind)


def scale_value(value, bounds):
    lo, hi = bounds
    return (value - lo) / (hi - lo)


def unscale_value(value, bounds):
    lo, hi = bounds
    return value * (hi - lo) + lo


def mse_loss(model, batch):
    """Mean over samples of the squared Euclidean output error."""
    if len(batch) == 0:
        raise ConfigError("empty batch")
    if batch.inputs.shape[1] != model.input_dim or batch.targets.shape[1] != model.output_dim:
        raise InputShapeError("batch dimensions do not match the model")
    err = model(batch.inputs) - batch.targets
    return float(np.mean(np.sum(err * err, axis=1)))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5000
    batch_size: int = 512
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 7
    split: float = 0.5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be non-negative")
        if not 0 < self.split < 1:
            raise ConfigError("split must lie strictly between 0 and 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


def parse_arch(arch, activation="sigmoid"):
    """Normalize ``"2,5,5,1"`` or ``[2, 5, 5, 1]`` into widths and per-layer activations."""
    if isinstance(arch, str):
        widths = [int(w) for w in arch.split(",") if w.strip()]
    else:
        widths = [int(w) for w in arch]
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ConfigError(f"architecture needs at least two positive widths, got {arch!r}")
    if isinstance(activation, (str, Activation)):
        acts = [Activation.parse(activation)] * (len(widths) - 1)
    else:
        acts = [Activation.parse(a) for a in activation]
        if len(acts) != len(widths) - 1:
            raise ConfigError("need one activation per layer")
    return widths, acts


def init_params(widths, rng):
    """Glorot-uniform weights, zero biases."""
    params = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-bound, bound, size=(fan_out, fan_in)), np.zeros(fan_out)))
    return params


def loss_and_gradient(params, acts, x, y):
    """Batch MSE and its gradient with respect to every weight and bias."""
    zs, outs = [], [x]
    a = x
    for (w, b), act in zip(params, acts):
        z = a @ w.T + b
        a = act(z)
        zs.append(z)
        outs.append(a)
    n = len(x)
    err = a - y
    loss = float(np.sum(err * err) / n)
    delta = (2.0 / n) * err
    grads = [None] * len(params)
    for k in range(len(params) - 1, -1, -1):
        delta = delta * acts[k].derivative(zs[k])
        grads[k] = (delta.T @ outs[k], delta.sum(axis=0))
        if k:
            delta = delta @ params[k][0]
    return loss, grads


def _to_model(params, acts):
    return MlpModel([Layer(w, b, act) for (w, b), act in zip(params, acts)])


@dataclass(eq=False)
class TrainResult:
    model: MlpModel
    train_loss: list
    val_loss: list

    def __iter__(self):
        yield self.model
        yield list(zip(self.train_loss, self.val_loss))


def train(arch, data, cfg, activation="sigmoid"):
    """Minibatch Adam on the MSE loss; bit-reproducible for a given ``cfg.seed``.

    The first ``cfg.split`` of the samples trains, the rest validates. The
    recorded training loss is the full training-set MSE after each epoch.
    """
    widths, acts = parse_arch(arch, activation)
    if widths[0] != data.inputs.shape[1] or widths[-1] != data.targets.shape[1]:
        raise ConfigError(
            f"architecture {widths} does not fit data with {data.inputs.shape[1]} inputs "
            f"and {data.targets.shape[1]} targets")
    rng = np.random.default_rng(cfg.seed)
    params = init_params(widths, rng)
    train_set, val_set = data.split(cfg.split)
    x, y = train_set.inputs, train_set.targets
    m = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    v = [(np.zeros_like(w), np.zeros_like(b)) for w, b in params]
    b1, b2, lr, eps = cfg.beta1, cfg.beta2, cfg.learning_rate, cfg.adam_eps
    t = 0
    train_hist, val_hist = [], []
    n = len(x)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            _, grads = loss_and_gradient(params, acts, x[idx], y[idx])
            t += 1
            c1 = 1.0 - b1 ** t
            c2 = 1.0 - b2 ** t
            new = []
            for k, ((w, b), (gw, gb)) in enumerate(zip(params, grads)):
                mw, mb = m[k]
                vw, vb = v[k]
                mw = b1 * mw + (1 - b1) * gw
                mb = b1 * mb + (1 - b1) * gb
                vw = b2 * vw + (1 - b2) * gw * gw
                vb = b2 * vb + (1 - b2) * gb * gb
                m[k], v[k] = (mw, mb), (vw, vb)
                w = w - lr * (mw / c1) / (np.sqrt(vw / c2) + eps)
                b = b - lr * (mb / c1) / (np.sqrt(vb / c2) + eps)
                new.append((w, b))
            params = new
        tr, _ = loss_and_gradient(params, acts, x, y)
        va = tr if len(val_set) == 0 else loss_and_gradient(
            params, acts, val_set.inputs, val_set.targets)[0]
        if not (math.isfinite(tr) and math.isfinite(va)):
            raise TrainingDivergedError(epoch)
        train_hist.append(tr)
        val_hist.append(va)
    return TrainResult(_to_model(params, acts), train_hist, val_hist)


def write_loss_csv(result, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "val_mse"])
        for k, (tr, va) in enumerate(zip(result.train_loss, result.val_loss)):
            w.writerow([k + 1, format(tr, ".17g"), format(va, ".17g")])


def write_dataset_csv(data, path):
    d_in, d_out = data.inputs.shape[1], data.targets.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"in_{i}" for i in range(d_in)] + [f"target_{i}" for i in range(d_out)])
        for xi, yi in zip(data.inputs, data.targets):
            w.writerow([format(c, ".17g") for c in np.concatenate([xi, yi])])


def read_dataset_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=np.float64)
    d_in = sum(1 for h in header if h.startswith("in_"))
    if d_in == 0 or d_in == len(header):
        raise ConfigError("dataset CSV needs in_* and target_* columns")
    return Dataset(body[:, :d_in], body[:, d_in:])
