import pytest
from hypothesis import settings

from symmin.field import make_grid

settings.register_profile("fast", max_examples=25, deadline=None)
settings.load_profile("fast")


@pytest.fixture(scope="session")
def square9():
    return make_grid("square", 9)


@pytest.fixture(scope="session")
def square17():
    return make_grid("square", 17)


@pytest.fixture(scope="session")
def disk33():
    return make_grid("disk", 33)


@pytest.fixture(scope="session")
def interval33():
    return make_grid("interval", 33)
