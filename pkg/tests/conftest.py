import hypothesis
import numpy as np
import pytest

from doorverse.assets import build_catalog, compose, generate_body, generate_handle
from doorverse.percept import CameraConfig
from doorverse.sim import RobotModel, TaskConfig

hypothesis.settings.register_profile("default", max_examples=25, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def lever_interior():
    return compose(generate_body("Interior", 0), generate_handle("lever", 1))


@pytest.fixture(scope="session")
def robot():
    return RobotModel()


@pytest.fixture(scope="session")
def task():
    return TaskConfig()


@pytest.fixture(scope="session")
def camera():
    return CameraConfig()


@pytest.fixture(scope="session")
def small_catalog():
    return build_catalog(4, 0.25, seed=7)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(0)
