import math
import os
import sys

import pytest

APP_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), os.pardir))
if APP_DIR not in sys.path:
    sys.path.insert(0, APP_DIR)

from history_core import History  # noqa: E402
from jump_system import build_jump_system  # noqa: E402
from sat_example import SatSystemSpec, build_sat_system  # noqa: E402
from systems import sat_model  # noqa: E402

REFERENCE_POINT = {"gamma": 1.2, "p": 0.95, "q": 0.01}

# (gamma, c, p, q) points inside the feasible region
FEASIBLE_POINTS = [
    (1.0, math.e, 0.95, 0.01),
    (1.0, math.e, 0.99, 0.05),
    (1.2, 5.2, 0.95, 0.01),
    (1.1, math.e, 0.99, 0.02),
    (1.2, math.e, 0.995, 0.01),
]


@pytest.fixture
def reference_system():
    return build_sat_system(SatSystemSpec(**REFERENCE_POINT))


@pytest.fixture
def sat_gamma1_system():
    return build_sat_system(SatSystemSpec(gamma=1.0, p=0.95, q=0.5))


@pytest.fixture
def locked_system():
    """Identity TPM: the initial mode is kept forever"""
    def make(gamma=1.2):
        return build_jump_system(sat_model(gamma), [[1.0, 0.0], [0.0, 1.0]])
    return make


@pytest.fixture
def unit_history():
    return History.constant(2, 1.0)
