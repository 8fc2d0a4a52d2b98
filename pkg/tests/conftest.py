import logging

import numpy as np
import pytest

from levyfilter.copulas import ClaytonCopula
from levyfilter.measures import ExponentialMeasure
from levyfilter.simulate import DriftSpec, L0Spec, ModelSpec, SensorSpec, X0Law

# unit-mass warnings from non-margin-consistent couplings are expected noise
# in the benchmark runs; keep test output readable
logging.getLogger("levyfilter.zakai").setLevel(logging.ERROR)


def make_benchmark_model(theta: float = 2.0, rate: float = 2.0) -> ModelSpec:
    """The reference comparison model: mean-reverting drift, Gaussian-bump
    sensor, finite-activity exponential margins, half-weighted Clayton."""
    return ModelSpec(
        drift=DriftSpec("linear", 0.0, -1.0),
        sensor=SensorSpec("gauss_bump"),
        nu1=ExponentialMeasure(rate=rate),
        nu2=ExponentialMeasure(rate=rate),
        copula=ClaytonCopula(theta, half_weights=True),
        l0=L0Spec("tempered", 1.5),
        eps=0.05,
        x0=X0Law("gaussian", 0.0, 1.0),
    )


@pytest.fixture
def benchmark_model():
    return make_benchmark_model()


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
