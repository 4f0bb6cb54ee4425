import math
import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

from src.cone_profiles import solve_cap, solve_wedge  # noqa: E402


@pytest.fixture(scope="session")
def cap_profile():
    """n = 3 cap of angle pi/3 on the coarsest profile grid."""
    return solve_cap(3, math.pi / 3, 64)


@pytest.fixture(scope="session")
def hemisphere_profile():
    return solve_cap(3, math.pi / 2, 64)


@pytest.fixture(scope="session")
def wedge_profile():
    return solve_wedge(math.pi / 2, 128)
