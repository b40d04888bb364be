import pytest

from utils.ensemble import DensitySpec, EnsembleConfig


@pytest.fixture
def gaussian():
    return DensitySpec.gaussian()


@pytest.fixture
def small_ensemble(gaussian):
    return EnsembleConfig(half_size=10, bandwidth_half=2, density=gaussian, master_seed=11)


@pytest.fixture
def diagonal_ensemble(gaussian):
    return EnsembleConfig(half_size=10, bandwidth_half=0, density=gaussian, master_seed=5)
