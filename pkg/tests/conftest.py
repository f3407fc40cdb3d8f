import numpy as np
import pytest

from simec.experiments import train_experiment
from simec.nn import Layer, MlpModel


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def example3_model():
    return MlpModel([Layer([[1.0, 2.0, 2.0], [3.0, 1.0, 5.0]], [0.0, 0.0], "identity")])


@pytest.fixture
def linear_model():
    """N(x, y) = x + 2y."""
    return MlpModel([Layer([[1.0, 2.0]], [0.0], "identity")])


@pytest.fixture(scope="session")
def circle_run():
    return train_experiment("circle")


@pytest.fixture(scope="session")
def circle_model(circle_run):
    return circle_run[1].model
