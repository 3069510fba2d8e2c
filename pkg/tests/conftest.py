import pytest

from hitlaw.base_process import BaseProcess
from hitlaw.fiber import FiberMeasure, binary_symmetric_model


@pytest.fixture
def coin_pair():
    """Symmetric two-symbol family with p = 0.3 (fair-coin noise)."""
    proc, fm = binary_symmetric_model(0.3)
    return proc, fm


@pytest.fixture
def markov_proc():
    return BaseProcess.markov([[0.9, 0.1], [0.2, 0.8]])


def random_fiber_measure(rng, s: int, b: int, min_entry: float = 0.05) -> FiberMeasure:
    """Random row-stochastic matrix with entries bounded away from {0, 1}."""
    w = rng.uniform(min_entry, 1.0, size=(s, b))
    w = w / w.sum(axis=1, keepdims=True)
    return FiberMeasure(w)


def random_base(rng, s: int) -> BaseProcess:
    w = rng.uniform(0.1, 1.0, size=s)
    return BaseProcess.bernoulli(w / w.sum())
