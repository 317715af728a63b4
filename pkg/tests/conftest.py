import numpy as np
import pytest

from magreduce import models
from magreduce.numerics import StepperChoice


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def rk4_fine():
    return StepperChoice(kind="rk4", h=1e-3)


@pytest.fixture(scope="session")
def rotor_params():
    return models.RotorParams()


@pytest.fixture(scope="session")
def beanie_params():
    return models.BeanieParams()
