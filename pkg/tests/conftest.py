import numpy as np
import pytest

from mimo_wsrm import SystemConfig, generate_channels, random_feasible_beamformers


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    a = crandn(rng, n, rank)
    return a @ a.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def small_config():
    """Two cells, default antenna counts, 4 subcarriers, few IA restarts."""
    return SystemConfig(num_subcarriers=4, ia_restarts=5)


@pytest.fixture
def instance():
    """Factory for (config, channels, beams) random problem instances."""
    def make(seed=0, **overrides):
        params = dict(num_subcarriers=4, ia_restarts=3, user_weights=None, rng_seed=seed)
        params.update(overrides)
        config = SystemConfig(**params)
        channels = generate_channels(config)
        beams = random_feasible_beamformers(config)
        return config, channels, beams
    return make
