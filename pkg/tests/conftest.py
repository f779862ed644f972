"""
Shared fixtures and the slow-test switch
"""

import numpy as np
import pytest

from api.models import MS_PER_HOUR, MS_PER_WEEK, ClusterConfig
from core.san import Activity, Case, Deterministic, Exponential, Place, SanModel, add_tokens
from core.state_space import Ctmc

# Two-state up/down chain: one failure per week, 12 h mean repair
UP_DOWN_FAILURE = 1.0 / MS_PER_WEEK
UP_DOWN_REPAIR = 1.0 / (12.0 * MS_PER_HOUR)


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long acceptance checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance check, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def up_down_ctmc() -> Ctmc:
    return Ctmc(
        states=["up", "down"],
        sources=np.array([0, 1]),
        targets=np.array([1, 0]),
        rates=np.array([UP_DOWN_FAILURE, UP_DOWN_REPAIR]),
        initial=np.array([1.0, 0.0]),
        name="up-down",
    )


def fixed_delay_model(delay: float = 225.0) -> SanModel:
    """One token moving from Start to Done after a deterministic delay"""
    return SanModel(
        "fixed-delay",
        (Place("Start", 1), Place("Done", 0)),
        (
            Activity.timed(
                "work",
                Deterministic(delay),
                input_places=(("Start", 1),),
                cases=(Case(actions=(add_tokens("Done"),)),),
            ),
        ),
    )


@pytest.fixture
def fixed_delay() -> SanModel:
    return fixed_delay_model()


@pytest.fixture
def race_model() -> SanModel:
    """Token taken by whichever of two exponential activities fires first"""
    return SanModel(
        "race",
        (Place("Start", 1), Place("A", 0), Place("B", 0)),
        (
            Activity.timed("toA", Exponential(1.0), input_places=(("Start", 1),), cases=(Case(actions=(add_tokens("A"),)),)),
            Activity.timed("toB", Exponential(3.0), input_places=(("Start", 1),), cases=(Case(actions=(add_tokens("B"),)),)),
        ),
    )


@pytest.fixture
def small_config() -> ClusterConfig:
    """table2 with two Erlang stages, small enough for fast tests"""
    return ClusterConfig(E_S=2)
