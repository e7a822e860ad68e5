"""Shared model fixtures for the test suite."""

import pytest

from tvls import (
    Affine,
    Constant,
    LevyModel,
    Logistic,
    MatrixFunction,
    Sinusoidal,
    StateSpaceModel,
)


@pytest.fixture
def brownian():
    return LevyModel(brownian_variance=1.0)


@pytest.fixture
def car1(brownian):
    """Constant CAR(1): dX = -X dt + dL, Y = X (an OU process)."""
    A = MatrixFunction([[Constant(-1.0)]], what="A")
    return StateSpaceModel(1, A, [Constant(1.0)], [Constant(1.0)], brownian)


@pytest.fixture
def tvcar1(brownian):
    """tvCAR(1) with a(t) = 1.5 + 0.5 tanh(t), expressed as a logistic."""
    a = Logistic(1.0, 1.0, 2.0, 0.0)
    A = MatrixFunction([[a.negated()]], what="A")
    return StateSpaceModel(1, A, [Constant(1.0)], [Constant(1.0)], brownian)


@pytest.fixture
def diag_fixture(brownian):
    """Two-state diagonal model: A = diag(-2, -3), B = C = (1, 1)'."""
    A = MatrixFunction([[Constant(-2.0), Constant(0.0)],
                        [Constant(0.0), Constant(-3.0)]], what="A")
    return StateSpaceModel(2, A, [Constant(1.0), Constant(1.0)],
                           [Constant(1.0), Constant(1.0)], brownian)


@pytest.fixture
def companion_fixture(brownian):
    """Companion-form model observationally equivalent to diag_fixture."""
    A = MatrixFunction([[Constant(0.0), Constant(1.0)],
                        [Constant(-6.0), Constant(-5.0)]], what="A")
    return StateSpaceModel(2, A, [Constant(5.0), Constant(2.0)],
                           [Constant(0.0), Constant(1.0)], brownian)


@pytest.fixture
def noncomm_family():
    """Non-commuting smooth family A(t) = [[0, 1], [-2 - t, -3]]."""
    return MatrixFunction([[Constant(0.0), Constant(1.0)],
                           [Affine(-2.0, -1.0), Constant(-3.0)]], what="A")


@pytest.fixture
def sin_car1(brownian):
    """CAR(1) with a(t) = 1 + 0.5 sin(t)."""
    a = Sinusoidal(1.0, 0.5, 1.0, 0.0)
    A = MatrixFunction([[a.negated()]], what="A")
    return StateSpaceModel(1, A, [Constant(1.0)], [Constant(1.0)], brownian)
