import random

import pytest
from hypothesis import HealthCheck, settings

from echoring.cpk import setup

settings.register_profile(
    "ci",
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def toy_material():
    material, _ = setup(16, 1234, curve="toy97", l=16, hash_suite="sha256-trunc")
    return material


@pytest.fixture(scope="session")
def toy_params(toy_material):
    return toy_material.params


@pytest.fixture(scope="session")
def prod_material():
    material, _ = setup(256, 99)
    return material


@pytest.fixture(scope="session")
def prod_params(prod_material):
    return prod_material.params


@pytest.fixture
def rng():
    return random.Random(0xEC0)
