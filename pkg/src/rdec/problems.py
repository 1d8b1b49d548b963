"""ODE test problems with entropies and exact solutions."""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

# rhs of the oscillators is singular at the origin
MIN_RADIUS = 1e-300


@dataclass(frozen=True)
class OdeProblem:
    """
    An autonomous or time-dependent ODE y' = rhs(t, y) with an entropy.

    Attributes:
        name: Identifier used by the CLI
        dim: State dimension
        rhs: Right-hand side f(t, y)
        entropy: Convex entropy eta(y)
        entropy_derivative: Gradient of eta
        y0: Default initial state
        exact: Exact solution t -> y(t) for the default initial state, if known
        conservative: Whether <grad eta, f> vanishes identically
        entropy_exact: Exact eta(t), if known
    """

    name: str
    dim: int
    rhs: Callable[[float, np.ndarray], np.ndarray] = field(repr=False)
    entropy: Callable[[np.ndarray], float] = field(repr=False)
    entropy_derivative: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    y0: np.ndarray = field(repr=False)
    exact: Optional[Callable[[float], np.ndarray]] = field(default=None, repr=False)
    conservative: bool = True
    entropy_exact: Optional[Callable[[float], float]] = field(default=None, repr=False)

    def production(self, t: float, y: np.ndarray) -> float:
        """Semidiscrete entropy production <grad eta(y), f(t, y)>."""
        return float(np.dot(self.entropy_derivative(y), self.rhs(t, y)))


def _radius(u1: float, u2: float) -> float:
    n = float(np.hypot(u1, u2))
    if n < MIN_RADIUS:
        raise ProblemError(f"Oscillator state underflow: |y| = {n:.3e}")
    return n


def _rotate(y0: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([c * y0[0] - s * y0[1], s * y0[0] + c * y0[1]])


def _square_entropy(y: np.ndarray) -> float:
    return 0.5 * float(np.dot(y, y))


def _identity(y: np.ndarray) -> np.ndarray:
    return np.asarray(y, dtype=float).copy()


def nonlinear_oscillator(u1_0: float = 1.0, u2_0: float = 0.0) -> OdeProblem:
    """
    Rotation with angular speed 1/|y|: u1' = -u2/n, u2' = u1/n.

    The radius is conserved, so the solution is the rotation of y0 by t/n.
    """
    y0 = np.array([u1_0, u2_0], dtype=float)
    if not np.all(np.isfinite(y0)) or not np.any(y0 != 0.0):
        raise ProblemError(f"Initial state must be finite and nonzero, got {y0}")
    n0 = _radius(*y0)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        n = _radius(y[0], y[1])
        return np.array([-y[1] / n, y[0] / n])

    def exact(t: float) -> np.ndarray:
        return _rotate(y0, t / n0)

    return OdeProblem(
        name="oscillator",
        dim=2,
        rhs=rhs,
        entropy=_square_entropy,
        entropy_derivative=_identity,
        y0=y0,
        exact=exact,
        conservative=True,
        entropy_exact=lambda t: 0.5 * n0 * n0,
    )


def damped_oscillator(u1_0: float = 1.0, u2_0: float = 0.0, alpha: float = 0.01) -> OdeProblem:
    """
    Nonlinear oscillator with linear damping -alpha y.

    The radius decays like n0 exp(-alpha t) while the angle grows like
    (exp(alpha t) - 1) / (alpha n0), so eta decays like exp(-2 alpha t).
    """
    if not alpha > 0.0:
        raise ProblemError(f"Damping coefficient must be positive, got {alpha}")
    y0 = np.array([u1_0, u2_0], dtype=float)
    if not np.all(np.isfinite(y0)) or not np.any(y0 != 0.0):
        raise ProblemError(f"Initial state must be finite and nonzero, got {y0}")
    n0 = _radius(*y0)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        n = _radius(y[0], y[1])
        return np.array([-y[1] / n - alpha * y[0], y[0] / n - alpha * y[1]])

    def exact(t: float) -> np.ndarray:
        angle = np.expm1(alpha * t) / (alpha * n0)
        return np.exp(-alpha * t) * _rotate(y0, angle)

    def entropy_exact(t: float) -> float:
        return 0.5 * n0 * n0 * np.exp(-2.0 * alpha * t)

    return OdeProblem(
        name="damped",
        dim=2,
        rhs=rhs,
        entropy=_square_entropy,
        entropy_derivative=_identity,
        y0=y0,
        exact=exact,
        conservative=False,
        entropy_exact=entropy_exact,
    )


def pendulum(u1_0: float = 1.5, u2_0: float = 0.0) -> OdeProblem:
    """Nonlinear pendulum u1' = -sin u2, u2' = u1 with eta = u1^2/2 - cos u2."""
    y0 = np.array([u1_0, u2_0], dtype=float)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([-np.sin(y[1]), y[0]])

    def entropy(y: np.ndarray) -> float:
        return 0.5 * float(y[0]) ** 2 - float(np.cos(y[1]))

    def entropy_derivative(y: np.ndarray) -> np.ndarray:
        return np.array([y[0], np.sin(y[1])])

    return OdeProblem(
        name="pendulum",
        dim=2,
        rhs=rhs,
        entropy=entropy,
        entropy_derivative=entropy_derivative,
        y0=y0,
        conservative=True,
    )


def by_name(name: str, **params) -> OdeProblem:
    """
    Build a problem from its CLI name.

    Args:
        name: oscillator, damped, pendulum or burgers
        **params: Keyword parameters of the factory (unset values are dropped)

    Raises:
        ProblemError: If the name or a parameter is unknown
    """
    from .fv import burgers_problem

    factories = {
        "oscillator": nonlinear_oscillator,
        "damped": damped_oscillator,
        "pendulum": pendulum,
        "burgers": burgers_problem,
    }
    try:
        factory = factories[name.lower()]
    except KeyError:
        known = ", ".join(sorted(factories))
        raise ProblemError(f"Unknown problem '{name}' (known: {known})") from None

    params = {k: v for k, v in params.items() if v is not None}
    try:
        return factory(**params)
    except TypeError as e:
        raise ProblemError(f"Invalid parameters for problem '{name}': {e}") from e


class ProblemError(ValueError):
    """Raised for invalid problem parameters or states."""
    pass
