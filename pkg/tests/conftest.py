import pytest

from pspin_sim import PsPINConfig


@pytest.fixture
def default_cfg():
    return PsPINConfig()
