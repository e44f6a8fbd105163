import numpy as np
import pytest

from aquaspec import HyperRanges, default_config, generate_dataset


@pytest.fixture(scope="session")
def small_dataset():
    """60 samples, default physics, low noise; cheap enough for protocol tests."""
    return generate_dataset(default_config(n_samples=60, noise_sigma_au=0.001, seed=5))


@pytest.fixture(scope="session")
def fast_ranges():
    """Tiny-network search space so nested CV unit tests stay quick.

    Acceptance tests use the real defaults; these only exercise mechanics.
    """
    return HyperRanges(
        hidden_layers=(1, 2),
        learning_rate=(3e-3, 1e-2),
        hidden_units=(8, 24),
        weight_decay=(1e-5, 1e-4),
    )


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
