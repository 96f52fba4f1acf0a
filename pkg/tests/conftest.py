import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from shockhopf.model import (build_full_ns_lagrangian, build_isentropic_lagrangian,
                             rankine_hugoniot)
from shockhopf.profile import solve_profile


@pytest.fixture(scope="session")
def iso_shock():
    return rankine_hugoniot(build_isentropic_lagrangian(5.0 / 3.0, 0.1), [1.0, 0.0], 0.7)


@pytest.fixture(scope="session")
def iso_profile(iso_shock):
    model, ends = iso_shock
    return solve_profile(model, ends)


@pytest.fixture(scope="session")
def iso_profile_2000(iso_shock):
    model, ends = iso_shock
    return solve_profile(model, ends, n_nodes=2000)


@pytest.fixture(scope="session")
def ns_profile():
    model, ends = rankine_hugoniot(build_full_ns_lagrangian(), [1.0, 0.0, 1.0], 0.7)
    return solve_profile(model, ends, n_nodes=1601)
