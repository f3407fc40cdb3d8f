"""Presets for the four reproduced experiments.

Each preset fixes the dataset, architecture, training schedule, the box in
which the data live and the start points used for tracing/exploring. Trained
models are memoized per process since several checks share them.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .nn import forward
from .trainer import INPUT_BOXES, TrainConfig, generate_dataset, ideal_gas_ranges, scale_value, train


@dataclass(frozen=True)
class Experiment:
    name: str
    dataset: str
    arch: tuple
    train: TrainConfig
    n_samples: int = 2000
    trace_start: tuple = (0.25, 0.25)
    explore_start: tuple = (0.2, 0.2)
    explore_box: tuple = None
    notes: str = ""

    @property
    def box(self):
        return INPUT_BOXES[self.dataset]

    def with_seed(self, seed):
        if seed is None:
            return self
        return replace(self, train=replace(self.train, seed=seed))


def _gas_point(volume, pressure):
    v_rng, p_rng, _ = ideal_gas_ranges()
    return (scale_value(volume, v_rng), scale_value(pressure, p_rng))


EXPERIMENTS = {
    "circle": Experiment(
        "circle", "circle_exp", (2, 5, 5, 1), TrainConfig(epochs=5000, seed=7),
        explore_box=((0.0, 1.0), (0.0, 1.0)),
        notes="z = exp(x^2 + y^2 - 2): circular level sets"),
    "parabola": Experiment(
        "parabola", "parabola_exp", (2, 5, 5, 1), TrainConfig(epochs=20000, seed=7),
        explore_box=((0.0, 1.0), (0.0, 1.0)),
        notes="z = exp(x^2 + y - 2): parabolic level sets leaving the unit square"),
    "ideal_gas": Experiment(
        "ideal_gas", "ideal_gas", (2, 5, 10, 10, 5, 1), TrainConfig(epochs=10000, seed=7),
        trace_start=_gas_point(0.03, 1.75e5), explore_start=_gas_point(0.03, 1.75e5),
        explore_box=((0.0, 1.0), (0.0, 1.0)),
        notes="normalized (V, P) -> T = PV/(nR): isotherms"),
    # seeds 0, 3, 7 and 11 stall on a 0.07-0.08 MSE plateau for this architecture
    "sine": Experiment(
        "sine", "sine_classifier", (2, 5, 5, 5, 1), TrainConfig(epochs=20000, seed=2),
        trace_start=(0.0, 0.5), explore_start=(0.0, 0.5),
        explore_box=((-math.pi, math.pi), (-1.0, 1.0)),
        notes="label 1 iff y >= sin(x): the 0.5 level set is the decision boundary"),
}


def get_experiment(name):
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(
            f"unknown experiment {name!r} (known: {', '.join(EXPERIMENTS)})") from None


@functools.lru_cache(maxsize=None)
def _train_cached(exp):
    data = generate_dataset(exp.dataset, exp.n_samples, exp.train.seed)
    return data, train(list(exp.arch), data, exp.train)


def train_experiment(name, seed=None, epochs=None):
    """Dataset and TrainResult of an experiment, memoized per (preset, seed, epochs)."""
    exp = get_experiment(name).with_seed(seed)
    if epochs is not None:
        exp = replace(exp, train=replace(exp.train, epochs=epochs))
    return _train_cached(exp)


def bisect_level(model, x, target=0.5, lo=-1.0, hi=1.0, tol=1e-6):
    """Find ``y`` in ``[lo, hi]`` with ``N(x, y) = target`` by bisection."""
    f = lambda y: float(forward(model, np.array([x, y]))[0]) - target  # noqa: E731
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ConfigError(f"output does not cross {target} on x = {x}, y in [{lo}, {hi}]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
