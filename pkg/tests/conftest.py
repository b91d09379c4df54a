import math

import numpy as np
import pytest

from impiss import ImpulsiveSystem, ImpulseSchedule, ZeroInput, gen_periodic, simulate


def _zero_jump(k, t, x, w):
    return np.zeros_like(x())


def decay_system(rate: float = 1.0) -> ImpulsiveSystem:
    """Scalar ``dx = -rate x + w`` without impulse action."""
    return ImpulsiveSystem(1, 1, lambda t, x, w: -rate * x() + w, _zero_jump, 0.0, name="decay")


def halving_system() -> ImpulsiveSystem:
    """``dx = 0`` with ``Delta x = -x(t^-)/2`` at every impulse."""
    return ImpulsiveSystem(1, 1, lambda t, x, w: np.zeros(1), lambda k, t, x, w: -0.5 * x(), 0.0, name="halving")


@pytest.fixture
def decay():
    return decay_system()


@pytest.fixture
def halving():
    return halving_system()


@pytest.fixture
def decay_run():
    return simulate(decay_system(), 1.0, ZeroInput(1), ImpulseSchedule(()), 1.0, 0.01)


@pytest.fixture
def halving_run():
    return simulate(halving_system(), 1.0, ZeroInput(1), gen_periodic(0.0, 1.0, 5), 5.5, 0.1)


@pytest.fixture
def e():
    return math.e
