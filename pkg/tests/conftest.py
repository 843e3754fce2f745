from __future__ import annotations

import numpy as np
import pytest

from pulsepend.closed_form import mode_constants
from pulsepend.hybrid_core import SolverConfig
from pulsepend.limit_cycle import compute_cycle
from pulsepend.pendulum_model import SystemParams

ALPHA = 0.5
PULSE = 0.1


@pytest.fixture(scope="session")
def params() -> SystemParams:
    return SystemParams(alpha=ALPHA, I=PULSE, dynamics="linear")


@pytest.fixture(scope="session")
def mc():
    return mode_constants(ALPHA)


@pytest.fixture(scope="session")
def cycle(params):
    return compute_cycle(params)


@pytest.fixture()
def cfg() -> SolverConfig:
    return SolverConfig(t_max=30.0, j_max=60)


@pytest.fixture()
def start_state() -> np.ndarray:
    return np.array([0.2, 0.0, 1.0])
