from __future__ import annotations
import math

import numpy as np
import pytest

from sprlab.core.log import configure_logging
from sprlab.domain.catalog import (
    cyclic_hyperbolic, cyclic_parabolic, one_cusp, parabolic_pair, symmetric_schottky,
)
from sprlab.domain.hyperbolic import BASEPOINT
from sprlab.domain.metric import Bump, BumpField


@pytest.fixture(autouse=True)
def _quiet_logs():
    configure_logging("WARNING")
    yield


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def schottky():
    return symmetric_schottky(3.0)


@pytest.fixture(scope="session")
def tr3_schottky():
    # generadores con traza 3
    return symmetric_schottky(2.0 * math.acosh(1.5))


@pytest.fixture(scope="session")
def cyclic():
    return cyclic_hyperbolic(2.0)


@pytest.fixture(scope="session")
def parabolic():
    return cyclic_parabolic(1.0)


@pytest.fixture(scope="session")
def pair():
    return parabolic_pair(4.0)


@pytest.fixture(scope="session")
def cusp():
    return one_cusp(4.0, 2.5)


@pytest.fixture
def bump():
    return BumpField([Bump(BASEPOINT, 1.0, 1.0)])
