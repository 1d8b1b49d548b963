"""Entropy-conservative finite volumes for periodic 1D Burgers."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .problems import OdeProblem


@dataclass(frozen=True)
class FvGrid:
    """
    Uniform periodic grid on [-1, 1].

    Attributes:
        N: Number of cells
        dx: Cell width 2/N
        x: Cell centers
    """

    N: int
    dx: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False)
    periodic: bool = True

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 3:
            raise FvError(f"Grid needs at least 3 cells, got {self.N}")
        dx = 2.0 / self.N
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "x", -1.0 + dx * (np.arange(self.N) + 0.5))


def ec_flux(u_left: np.ndarray, u_right: np.ndarray) -> np.ndarray:
    """Two-point flux (uL^2 + uL uR + uR^2) / 6, consistent with u^2/2."""
    return (u_left * u_left + u_left * u_right + u_right * u_right) / 6.0


def burgers_ec_rhs(grid: FvGrid, u: np.ndarray) -> np.ndarray:
    """
    Semidiscrete -(F_{i+1/2} - F_{i-1/2}) / dx with periodic wraparound.

    sum_i u_i rhs_i telescopes to zero, so the discrete energy is conserved.

    Raises:
        FvError: If u has the wrong length or is not finite
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (grid.N,):
        raise FvError(f"State has shape {u.shape}, expected ({grid.N},)")
    if not np.all(np.isfinite(u)):
        raise FvError("Non-finite state in Burgers right-hand side")
    flux = ec_flux(u, np.roll(u, -1))
    return -(flux - np.roll(flux, 1)) / grid.dx


def initial_condition(x: np.ndarray) -> np.ndarray:
    return np.exp(-30.0 * x * x)


def burgers_problem(
    N: int = 100, u0: Callable[[np.ndarray], np.ndarray] = initial_condition
) -> OdeProblem:
    """Method-of-lines Burgers problem with eta = dx/2 sum u_i^2."""
    grid = FvGrid(N)
    dx = grid.dx

    def rhs(t: float, u: np.ndarray) -> np.ndarray:
        return burgers_ec_rhs(grid, u)

    def entropy(u: np.ndarray) -> float:
        return 0.5 * dx * float(np.dot(u, u))

    def entropy_derivative(u: np.ndarray) -> np.ndarray:
        return dx * np.asarray(u, dtype=float)

    return OdeProblem(
        name="burgers",
        dim=grid.N,
        rhs=rhs,
        entropy=entropy,
        entropy_derivative=entropy_derivative,
        y0=np.asarray(u0(grid.x), dtype=float),
        conservative=True,
    )


def cfl_time_step(grid: FvGrid, u: np.ndarray, cfl: float = 0.3) -> float:
    """dt = cfl * dx / max|u|."""
    speed = float(np.max(np.abs(u)))
    if not cfl > 0.0 or not speed > 0.0:
        raise FvError(f"Cannot derive a time step from cfl={cfl} and max|u|={speed}")
    return cfl * grid.dx / speed


class FvError(ValueError):
    """Raised for invalid finite-volume grids or states."""
    pass
