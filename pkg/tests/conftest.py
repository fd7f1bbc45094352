import pytest

from wanewave.model import ModelParams
from wanewave.switching import find_switch_points

NU_VALUES = (4.8, 3.2, 2.0, 1.0, 0.0)


@pytest.fixture(scope="session")
def profiles():
    """Stability profiles of the pertussis parameters for the boosting values studied."""
    return {nu: find_switch_points(ModelParams(nu=nu)) for nu in NU_VALUES}


@pytest.fixture(scope="session")
def bubble_sweep():
    from wanewave.scan import sweep_diagram

    return sweep_diagram(ModelParams(nu=4.8), 3.0, 4.8, 37, "up")
