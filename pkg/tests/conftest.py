import numpy as np
import pytest

from uavirl.channel import ChannelMode
from uavirl.world import Scenario, ScenarioConfig, build_scenario, with_channel_mode


@pytest.fixture(scope="session")
def scenario() -> Scenario:
    """The default 25-cell scenario, probabilistic channel, seed 42."""
    return build_scenario(ScenarioConfig(), seed=42)


@pytest.fixture(scope="session")
def scenario_los(scenario) -> Scenario:
    return with_channel_mode(scenario, ChannelMode.LOS_ONLY)


@pytest.fixture(scope="session")
def expert_trajs(scenario):
    from uavirl.baselines import scripted_expert

    return scripted_expert(scenario, n_trajs=10)


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
