import numpy as np
import pytest

from priorsens import config, experiments
from priorsens.samples import ChainSet


@pytest.fixture(scope="session")
def gaussian_cfg():
    return config.resolve({"experiment": "gaussian"})


@pytest.fixture(scope="session")
def gaussian_samples(gaussian_cfg):
    return experiments.sample(gaussian_cfg)


@pytest.fixture
def oracle_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("PRIORSENS_CACHE", str(tmp_path / "cache"))
    return tmp_path / "cache"


def normal_chains(n_chains, n_draws, dimension, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    return ChainSet([scale * rng.standard_normal((n_draws, dimension)) for _ in range(n_chains)])
