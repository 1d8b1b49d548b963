"""Tests for the ODE problem zoo."""

import numpy as np
import pytest

from rdec.problems import (
    ProblemError,
    by_name,
    damped_oscillator,
    nonlinear_oscillator,
    pendulum,
)


def test_oscillator_entropy_and_full_turn():
    problem = nonlinear_oscillator(3.0, 4.0)
    assert problem.entropy(np.array([3.0, 4.0])) == 12.5
    unit = nonlinear_oscillator(1.0, 0.0)
    np.testing.assert_allclose(unit.exact(2 * np.pi), [1.0, 0.0], atol=1e-14)


def test_pendulum_defaults():
    problem = pendulum()
    np.testing.assert_array_equal(problem.y0, [1.5, 0.0])
    assert problem.entropy(problem.y0) == pytest.approx(0.125, abs=1e-15)
    assert problem.exact is None


@pytest.mark.parametrize("factory", [nonlinear_oscillator, pendulum])
def test_conservative_production_vanishes(factory):
    problem = factory()
    rng = np.random.default_rng(3)
    for y in rng.normal(size=(100, 2)):
        scale = np.linalg.norm(problem.entropy_derivative(y)) * np.linalg.norm(problem.rhs(0, y))
        assert abs(problem.production(0.0, y)) <= 1e-12 * max(scale, 1.0)


def test_damped_production():
    problem = damped_oscillator(alpha=0.01)
    rng = np.random.default_rng(5)
    for y in rng.normal(size=(20, 2)):
        expected = -2.0 * 0.01 * problem.entropy(y)
        assert problem.production(0.0, y) == pytest.approx(expected, rel=1e-12)
        assert problem.production(0.0, y) < 0.0


@pytest.mark.parametrize(
    "problem",
    [nonlinear_oscillator(1.0, 0.0), nonlinear_oscillator(0.3, -2.0), damped_oscillator(1.0, 0.5)],
    ids=["unit", "skewed", "damped"],
)
def test_exact_solution_satisfies_ode(problem):
    h = 1e-5
    for t in np.linspace(0.0, 10.0, 20):
        derivative = (problem.exact(t + h) - problem.exact(t - h)) / (2 * h)
        np.testing.assert_allclose(derivative, problem.rhs(t, problem.exact(t)), atol=1e-8)


def test_damped_exact_entropy_decay():
    problem = damped_oscillator(1.0, 2.0, alpha=0.1)
    for t in (0.0, 1.0, 7.5):
        assert problem.entropy(problem.exact(t)) == pytest.approx(problem.entropy_exact(t))
    assert problem.entropy_exact(5.0) == pytest.approx(2.5 * np.exp(-1.0))


def test_damped_tends_to_undamped():
    damped = damped_oscillator(1.0, 0.0, alpha=1e-8)
    undamped = nonlinear_oscillator(1.0, 0.0)
    np.testing.assert_allclose(damped.exact(1.0), undamped.exact(1.0), atol=1e-6)


def test_invalid_parameters():
    with pytest.raises(ProblemError):
        nonlinear_oscillator(0.0, 0.0)
    with pytest.raises(ProblemError):
        damped_oscillator(alpha=0.0)


def test_state_underflow_guard():
    problem = nonlinear_oscillator()
    with pytest.raises(ProblemError, match="underflow"):
        problem.rhs(0.0, np.array([0.0, 0.0]))


def test_by_name():
    assert by_name("pendulum").name == "pendulum"
    assert by_name("damped", alpha=0.5, u1_0=None).name == "damped"
    assert by_name("burgers", N=10).dim == 10
    with pytest.raises(ProblemError, match="Unknown"):
        by_name("lorenz")
    with pytest.raises(ProblemError, match="Invalid parameters"):
        by_name("pendulum", alpha=0.1)
