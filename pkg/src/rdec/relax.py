"""
Relaxation coefficient gamma for one step.

Two sign conventions meet here. The direction form takes `estimate` as
the residual-side term of the energy balance (minus the production),
the root form takes it as the entropy production itself.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
from scipy import optimize, sparse

from .debug import log_solver

# Degenerate-denominator threshold on squared norms
EPS = 1e-28


class RootMethod(str, Enum):
    BISECTION = "bisection"
    BRENT = "brent"
    NEWTON = "newton"


@dataclass(frozen=True)
class RootSolverConfig:
    """
    Scalar root solver settings for general entropies.

    Attributes:
        method: Bisection, Brent or Newton
        bracket_radius: Initial bracket is [1 - radius, 1 + radius]
        tol: Tolerance on |r(gamma)| relative to |eta(y0)| + 1
        max_iter: Iteration cap of the underlying solver
    """

    method: RootMethod = RootMethod.BRENT
    bracket_radius: float = 0.5
    tol: float = 1e-13
    max_iter: int = 100

    def __post_init__(self):
        object.__setattr__(self, "method", RootMethod(self.method))
        if not self.tol > 0.0:
            raise RelaxationError(f"Root solver tolerance must be positive, got {self.tol}")
        if not 0.0 < self.bracket_radius < 1.0:
            raise RelaxationError(f"Bracket radius must lie in (0, 1), got {self.bracket_radius}")
        if self.max_iter < 1:
            raise RelaxationError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class GammaResult:
    """Outcome of a relaxation solve."""

    gamma: float
    residual: float = 0.0
    iterations: int = 0
    fallback_used: bool = False

    def __post_init__(self):
        if not np.isfinite(self.gamma):
            raise RelaxationError(f"Relaxation coefficient is not finite: {self.gamma}")


FALLBACK = GammaResult(gamma=1.0, fallback_used=True)


def _inner(x: np.ndarray, y: np.ndarray, weight) -> float:
    if weight is None:
        return float(np.dot(x, y))
    if sparse.issparse(weight) or np.ndim(weight) == 2:
        return float(np.dot(weight @ x, y))
    return float(np.dot(weight * x, y))


def gamma_energy(A: np.ndarray, b: np.ndarray, derivatives: np.ndarray) -> GammaResult:
    """
    Closed-form gamma for eta = 1/2 |y|^2 on an explicit RK step.

    gamma = 2 sum_ij b_i A_ij <f_i, f_j> / |sum_i b_i f_i|^2. With this
    weight placement the relaxed step reproduces the stage-wise energy
    production dt sum_i b_i <u_i, f_i>, so a conservative problem keeps
    its norm exactly.

    Args:
        A: (s, s) stage matrix
        b: s weights
        derivatives: (s, dim) stage derivatives f_i

    Returns:
        GammaResult, with the fallback gamma = 1 at equilibria

    Raises:
        RelaxationError: If the inner products are not finite
    """
    F = np.atleast_2d(np.asarray(derivatives, dtype=float))
    gram = F @ F.T
    if not np.all(np.isfinite(gram)):
        raise RelaxationError("Non-finite stage derivatives in energy relaxation")

    b = np.asarray(b, dtype=float)
    denominator = float(b @ gram @ b)
    scale = float(np.max(np.diag(gram), initial=0.0))
    if denominator <= EPS * scale or scale == 0.0:
        return FALLBACK

    numerator = 2.0 * float(np.sum(b[:, None] * np.asarray(A, dtype=float) * gram))
    return GammaResult(gamma=numerator / denominator)


def gamma_energy_from_direction(
    y0: np.ndarray,
    direction: np.ndarray,
    estimate: float = 0.0,
    weight: Optional[np.ndarray] = None,
) -> GammaResult:
    """
    Solve 1/2 g^2 <d,d>_W + g <y0,d>_W + g * estimate = 0 for its nonzero root.

    Args:
        y0: State at the start of the step
        direction: Unrelaxed increment d
        estimate: Residual-side estimate (0 for conservative enforcement)
        weight: Diagonal weight W as a vector, or a symmetric positive
            definite matrix (dense or sparse); identity when omitted

    Returns:
        GammaResult with gamma = -2 (<y0,d>_W + estimate) / <d,d>_W
    """
    y0 = np.asarray(y0, dtype=float)
    d = np.asarray(direction, dtype=float)
    dd = _inner(d, d, weight)
    if not np.isfinite(dd):
        raise RelaxationError("Non-finite update direction")
    if dd <= EPS:
        return FALLBACK

    gamma = -2.0 * (_inner(y0, d, weight) + estimate) / dd
    if not np.isfinite(gamma):
        raise RelaxationError(f"Relaxation coefficient is not finite: {gamma}")
    return GammaResult(gamma=gamma)


def gamma_entropy_root(
    eta: Callable[[np.ndarray], float],
    y0: np.ndarray,
    direction: np.ndarray,
    estimate: float,
    cfg: Optional[RootSolverConfig] = None,
) -> GammaResult:
    """
    Find gamma near 1 with r(gamma) = eta(y0 + gamma d) - eta(y0) - gamma * estimate = 0.

    gamma = 0 is always a root; the bracket [1 - R, 1 + R] is widened by
    halving its left end and doubling its radius to the right, at most
    four times, so it never reaches 0.

    Args:
        eta: Convex entropy functional
        y0: State at the start of the step
        direction: Unrelaxed increment d
        estimate: Entropy production over the step
        cfg: Solver settings

    Returns:
        GammaResult whose residual satisfies |r(gamma)| <= tol (|eta(y0)| + 1)

    Raises:
        NoBracketError: If no sign change was found
        NoConvergenceError: If the solver failed or the certificate does not hold
    """
    cfg = cfg or RootSolverConfig()
    y0 = np.asarray(y0, dtype=float)
    d = np.asarray(direction, dtype=float)
    eta0 = float(eta(y0))
    if not np.isfinite(eta0):
        raise RelaxationError(f"Entropy is not finite at the start of the step: {eta0}")

    if float(np.dot(d, d)) <= EPS and abs(estimate) <= EPS:
        return FALLBACK

    def residual(gamma: float) -> float:
        return float(eta(y0 + gamma * d)) - eta0 - gamma * estimate

    tol = cfg.tol * (abs(eta0) + 1.0)
    r1 = residual(1.0)
    if abs(r1) <= tol:
        log_solver(cfg.method.value, 1.0, abs(r1), 0)
        return GammaResult(gamma=1.0, residual=abs(r1))

    if cfg.method is RootMethod.NEWTON:
        gamma, iterations = _newton(residual, cfg)
    else:
        lo, hi = _bracket(residual, cfg)
        solver = optimize.brentq if cfg.method is RootMethod.BRENT else optimize.bisect
        try:
            gamma, info = solver(
                residual,
                lo,
                hi,
                xtol=1e-16,
                rtol=4.0 * np.finfo(float).eps,
                maxiter=cfg.max_iter,
                full_output=True,
                disp=False,
            )
        except (RuntimeError, ValueError) as e:
            raise NoConvergenceError(f"{cfg.method.value} failed: {e}") from e
        if not info.converged:
            raise NoConvergenceError(
                f"{cfg.method.value} did not converge in {cfg.max_iter} iterations"
            )
        iterations = info.iterations

    r = abs(residual(gamma))
    log_solver(cfg.method.value, gamma, r, iterations)
    if not r <= tol:
        raise NoConvergenceError(f"Residual {r:.3e} above tolerance {tol:.3e} at gamma={gamma}")
    return GammaResult(gamma=float(gamma), residual=r, iterations=int(iterations))


def _bracket(residual: Callable[[float], float], cfg: RootSolverConfig) -> tuple[float, float]:
    radius = cfg.bracket_radius
    lo, hi = 1.0 - radius, 1.0 + radius
    for _ in range(5):
        r_lo, r_hi = residual(lo), residual(hi)
        if not (np.isfinite(r_lo) and np.isfinite(r_hi)):
            raise NoBracketError(f"Entropy residual not finite on [{lo}, {hi}]")
        if r_lo * r_hi <= 0.0:
            return lo, hi
        lo *= 0.5
        radius *= 2.0
        hi = 1.0 + radius
    raise NoBracketError(f"No sign change of the entropy residual on [{lo * 2.0}, {hi}]")


def _newton(residual: Callable[[float], float], cfg: RootSolverConfig) -> tuple[float, int]:
    def fprime(gamma: float) -> float:
        step = 1e-7 * (1.0 + abs(gamma))
        return (residual(gamma + step) - residual(gamma - step)) / (2.0 * step)

    try:
        gamma, info = optimize.newton(
            residual,
            1.0,
            fprime=fprime,
            tol=1e-15,
            maxiter=cfg.max_iter,
            full_output=True,
            disp=False,
        )
    except (RuntimeError, ZeroDivisionError) as e:
        raise NoConvergenceError(f"newton failed: {e}") from e
    if not info.converged or not gamma > 0.0:
        raise NoConvergenceError(f"newton did not converge to a positive root (gamma={gamma})")
    return float(gamma), info.iterations


class RelaxationError(Exception):
    """Raised when a relaxation coefficient cannot be computed."""
    pass


class NoBracketError(RelaxationError):
    """Raised when the entropy residual shows no sign change around gamma = 1."""
    pass


class NoConvergenceError(RelaxationError):
    """Raised when the scalar root solver fails or misses its tolerance."""
    pass
