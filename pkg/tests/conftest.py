"""Shared fixtures: cheap session-scoped configs and environments.

Heavy trained-run fixtures live in test_acceptance.py so that unit-test
runs never pay for training.
"""

import numpy as np
import pytest

from metasense.baselines import tiny_config
from metasense.mdp_env import build_environment
from metasense.scene import ExperimentConfig


@pytest.fixture(scope="session")
def default_cfg():
    return ExperimentConfig()


@pytest.fixture(scope="session")
def default_env(default_cfg):
    return build_environment(default_cfg)


@pytest.fixture(scope="session")
def tiny_cfg():
    return tiny_config(0)


@pytest.fixture(scope="session")
def tiny_env(tiny_cfg):
    return build_environment(tiny_cfg)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
