import numpy as np
import pytest

from hideseek.world import WorldConfig


def seed_for(salt, index) -> int:
    return int(np.random.SeedSequence((salt, index)).generate_state(1, np.uint64)[0])


@pytest.fixture
def small_config():
    """2v1 with a short clock: enough to exercise every subsystem fast."""
    return WorldConfig(n_seekers=2, n_hiders=1, max_time=10.0)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))
