import pytest

from lhbl.domains import StateSpaceSpec
from lhbl.evaluation import build_oracle


@pytest.fixture(scope="session")
def eight_oracle():
    return build_oracle(StateSpaceSpec("sliding_tile", 8))


@pytest.fixture(scope="session")
def lo3_oracle():
    return build_oracle(StateSpaceSpec("lights_out", 3))
