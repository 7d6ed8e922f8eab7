import numpy as np
import pytest

from qsdcsim.states import StateVector


def random_state(dim: int, particles: int, rng: np.random.Generator) -> StateVector:
    """Haar-ish random pure state for property tests."""
    n = dim**particles
    amps = rng.normal(size=n) + 1j * rng.normal(size=n)
    amps /= np.linalg.norm(amps)
    return StateVector(dim, particles, amps)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
