import numpy as np
import pytest
from hypothesis import settings

from elastic_isac.config import ScenarioConfig, desk_config

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def table1():
    return ScenarioConfig()


@pytest.fixture
def desk():
    return desk_config()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
