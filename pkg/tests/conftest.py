import numpy as np
import pytest
from hypothesis import settings

from jointdet.instances import instance_a, instance_b, instance_g

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def inst_a():
    return instance_a()


@pytest.fixture
def inst_b():
    return instance_b()


@pytest.fixture(scope="session")
def inst_g():
    return instance_g()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
