import json
import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from mckeithan import McKeithanParams  # noqa: E402
from synthesis import SingExcModel  # noqa: E402
from zermelo import RevolutionProblem, historical_problem  # noqa: E402


@pytest.fixture
def case3():
    """Singular exceptional model b = b1 = 1, c = 0"""
    return SingExcModel(b=1.0, b1=1.0, c=0.0)


@pytest.fixture
def historical():
    return historical_problem()


@pytest.fixture
def revolution():
    return RevolutionProblem.from_text('1 + r^2/4', '0.5*r')


@pytest.fixture
def mckeithan_params():
    return McKeithanParams(beta2=1.0, beta3=2.0, beta4=1.0, alpha2=2.0, alpha3=0.5, alpha4=1.0,
                           delta1=1.0, delta2=2.0, d=0.3)


@pytest.fixture
def write_scenario(tmp_path):
    """Write a scenario dict to a JSON file and return its path"""
    def write(scenario, name='scenario.json'):
        path = tmp_path / name
        path.write_text(json.dumps(scenario), encoding='utf-8')
        return str(path)
    return write
