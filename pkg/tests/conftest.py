import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swarmsim.config import Behavior, ControllerMode, SpawnSpec, WorldConfig

settings.register_profile(
    "ci", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


MILL = ControllerMode(Behavior.MILLING, 0.25, math.radians(45.0))


def small_config(seed: int = 0, n: int = 6, **kw) -> WorldConfig:
    base = dict(n_agents=n, seed=seed, controller=MILL,
                spawn=SpawnSpec(width=2.0, height=2.0))
    base.update(kw)
    return WorldConfig(**base).validate()


@pytest.fixture
def rng():
    return np.random.default_rng(20240816)
