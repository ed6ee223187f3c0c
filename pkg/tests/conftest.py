"""
Shared pytest setup: repository root on sys.path, the slow marker, small fixtures
"""
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from src.models import MlpSpec, build_mlp, linear_model  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale experiments")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale experiment, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_mlp():
    return build_mlp(MlpSpec(3, [5], "tanh"), seed=7)


@pytest.fixture
def doubling_teacher():
    """T(x) = 2x"""
    return linear_model(2.0)


@pytest.fixture
def identity_student():
    """S(x) = x"""
    return linear_model(1.0)
