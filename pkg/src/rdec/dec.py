"""
Deferred Correction time integration with optional relaxation.

Each step iterates y^{m,(k)} = y_n + dt sum_r theta_r^m f(y^{r,(k-1)}) on
the subtimesteps; only the last subtimestep is updated by the final
correction. With relaxation on, that final increment is scaled by gamma.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Union

import numpy as np
from tqdm import tqdm

from .coeffs import NodeFamily, make_coefficients
from .debug import log_debug, log_step
from .models import Trajectory, TrajectoryRecord
from .problems import OdeProblem
from .relax import (
    GammaResult,
    RelaxationError,
    RootSolverConfig,
    gamma_energy,
    gamma_energy_from_direction,
    gamma_entropy_root,
)
from .tableau import ButcherTableau, named_tableau, rk_step


class RelaxationMode(str, Enum):
    """How gamma is applied: not at all, to the state only (IDT), or to state and time."""

    NONE = "none"
    IDT = "idt"
    RELAXATION = "relaxation"


class EntropyMode(str, Enum):
    """Closed form for the squared norm, or root solving for the problem's entropy."""

    ENERGY = "energy"
    GENERAL = "general"


@dataclass(frozen=True)
class DecConfig:
    """
    DeC method settings.

    Attributes:
        M: Number of subintervals
        K: Number of corrections, defaults to M+1
        family: Node family of the subtimesteps
        relaxation_mode: None, IDT or Relaxation
        entropy_mode: Energy or General
        root_solver: Settings of the General-mode root solve
    """

    M: int
    K: Optional[int] = None
    family: NodeFamily = NodeFamily.EQUISPACED
    relaxation_mode: RelaxationMode = RelaxationMode.NONE
    entropy_mode: EntropyMode = EntropyMode.ENERGY
    root_solver: RootSolverConfig = field(default_factory=RootSolverConfig)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise IntegrationError(f"Number of subintervals must be >= 1, got {self.M}")
        if self.K is None:
            object.__setattr__(self, "K", self.M + 1)
        if int(self.K) != self.K or self.K < 1:
            raise IntegrationError(f"Number of corrections must be >= 1, got {self.K}")
        object.__setattr__(self, "family", NodeFamily(self.family))
        object.__setattr__(self, "relaxation_mode", RelaxationMode(self.relaxation_mode))
        object.__setattr__(self, "entropy_mode", EntropyMode(self.entropy_mode))

    @classmethod
    def from_order(cls, order: int, **kwargs) -> "DecConfig":
        """DeC of the given order: M = order-1 subintervals and K = order corrections."""
        if order < 1:
            raise IntegrationError(f"Order must be >= 1, got {order}")
        return cls(M=max(order - 1, 1), K=order, **kwargs)

    @property
    def order(self) -> int:
        return min(self.K, self.M + 1)

    @property
    def label(self) -> str:
        prefix = "RDeC" if self.relaxation_mode is RelaxationMode.RELAXATION else "DeC"
        suffix = "-IDT" if self.relaxation_mode is RelaxationMode.IDT else ""
        family = "-GL" if self.family is NodeFamily.GAUSS_LOBATTO else ""
        return f"{prefix}{self.order}{family}{suffix}"


@dataclass(frozen=True)
class RkConfig:
    """Relaxed explicit RK comparison method (SSPRK22, SSPRK33 or RK44)."""

    method: str
    relaxation_mode: RelaxationMode = RelaxationMode.NONE
    entropy_mode: EntropyMode = EntropyMode.ENERGY
    root_solver: RootSolverConfig = field(default_factory=RootSolverConfig)

    def __post_init__(self):
        object.__setattr__(self, "relaxation_mode", RelaxationMode(self.relaxation_mode))
        object.__setattr__(self, "entropy_mode", EntropyMode(self.entropy_mode))

    @property
    def tableau(self) -> ButcherTableau:
        return named_tableau(self.method)

    @property
    def label(self) -> str:
        name = self.tableau.name
        if self.relaxation_mode is RelaxationMode.RELAXATION:
            return f"R{name}"
        return f"{name}-IDT" if self.relaxation_mode is RelaxationMode.IDT else name


MethodConfig = Union[DecConfig, RkConfig]


@dataclass
class StepResult:
    """
    Outcome of one step.

    Attributes:
        y: State at the end of the step
        gamma: Relaxation coefficient (1 when relaxation is off)
        stages: Subtimestep states of the last correction (or RK stages)
        derivatives: Right-hand sides at those states
        direction: Unrelaxed increment
        gamma_result: Details of the relaxation solve, if any
    """

    y: np.ndarray
    gamma: float
    stages: np.ndarray = field(repr=False)
    derivatives: np.ndarray = field(repr=False)
    direction: np.ndarray = field(repr=False)
    gamma_result: Optional[GammaResult] = None


def dec_step(
    cfg: DecConfig, problem: OdeProblem, tn: float, yn: np.ndarray, dt: float
) -> StepResult:
    """
    Advance one DeC step from (tn, yn) by dt.

    Raises:
        IntegrationError: If dt is not positive or the relaxation solve fails
    """
    if not dt > 0.0:
        raise IntegrationError(f"Time step must be positive, got {dt}")
    coeffs = make_coefficients(cfg.M, cfg.family)
    yn = np.atleast_1d(np.asarray(yn, dtype=float))
    times = tn + coeffs.nodes * dt

    # predictor: explicit Euler from y_n to every subtimestep
    stages = np.tile(yn, (cfg.M + 1, 1))
    derivs = np.tile(problem.rhs(times[0], yn), (cfg.M + 1, 1))

    for _ in range(1, cfg.K):
        stages[1:] = yn + dt * (coeffs.theta @ derivs)
        for m in range(1, cfg.M + 1):
            derivs[m] = problem.rhs(times[m], stages[m])

    direction = dt * (coeffs.last_row @ derivs)
    if cfg.relaxation_mode is RelaxationMode.NONE:
        return StepResult(yn + direction, 1.0, stages, derivs, direction)

    weights = dt * coeffs.last_row
    result = _relaxation_gamma(cfg, problem, times, yn, direction, stages, derivs, weights)
    y_end = yn + result.gamma * direction
    return StepResult(y_end, result.gamma, stages, derivs, direction, result)


def rk_relaxed_step(
    cfg: RkConfig, problem: OdeProblem, tn: float, yn: np.ndarray, dt: float
) -> StepResult:
    """Advance one explicit RK step, relaxed like the DeC step."""
    if not dt > 0.0:
        raise IntegrationError(f"Time step must be positive, got {dt}")
    tableau = cfg.tableau
    yn = np.atleast_1d(np.asarray(yn, dtype=float))
    step = rk_step(tableau, problem.rhs, tn, yn, dt)
    direction = step.y_next - yn
    if cfg.relaxation_mode is RelaxationMode.NONE:
        return StepResult(step.y_next, 1.0, step.stages, step.derivatives, direction)

    if cfg.entropy_mode is EntropyMode.ENERGY:
        try:
            result = gamma_energy(tableau.A, tableau.b, step.derivatives)
        except RelaxationError as e:
            raise IntegrationError(f"Relaxation failed: {e}") from e
    else:
        times = tn + tableau.c * dt
        result = _relaxation_gamma(
            cfg, problem, times, yn, direction, step.stages, step.derivatives, dt * tableau.b
        )
    return StepResult(
        yn + result.gamma * direction,
        result.gamma,
        step.stages,
        step.derivatives,
        direction,
        result,
    )


def _relaxation_gamma(
    cfg: MethodConfig,
    problem: OdeProblem,
    times: np.ndarray,
    yn: np.ndarray,
    direction: np.ndarray,
    stages: np.ndarray,
    derivs: np.ndarray,
    weights: np.ndarray,
) -> GammaResult:
    try:
        if cfg.entropy_mode is EntropyMode.ENERGY:
            estimate = -float(weights @ np.einsum("ij,ij->i", stages, derivs))
            return gamma_energy_from_direction(yn, direction, estimate)

        grads = np.array([problem.entropy_derivative(y) for y in stages])
        production = float(weights @ np.einsum("ij,ij->i", grads, derivs))
        return gamma_entropy_root(problem.entropy, yn, direction, production, cfg.root_solver)
    except RelaxationError as e:
        raise IntegrationError(f"Relaxation failed at t={times[0]:.12g}: {e}") from e


def step_function(cfg: MethodConfig) -> Callable[..., StepResult]:
    """Stepper matching the configuration type."""
    if isinstance(cfg, DecConfig):
        return dec_step
    if isinstance(cfg, RkConfig):
        return rk_relaxed_step
    raise IntegrationError(f"Unsupported method configuration: {type(cfg).__name__}")


def march(
    step: Callable[[float, np.ndarray, float], tuple[np.ndarray, float]],
    entropy: Callable[[np.ndarray], float],
    relaxation_mode: RelaxationMode,
    t0: float,
    y0: np.ndarray,
    dt: float,
    t_final: float,
    label: str = "",
    progress: bool = False,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """
    Drive a one-step method from t0 to t_final.

    Time advances by gamma*h with relaxation and by h otherwise, where h
    is dt clipped to the remaining interval. Integration stops once the
    remaining time is below 1e-8 dt.

    Args:
        step: (t, y, h) -> (y_next, gamma)
        entropy: eta recorded at every step
        relaxation_mode: Decides how time advances
        t0: Initial time
        y0: Initial state
        dt: Nominal step
        t_final: End time
        label: Trajectory label
        progress: Show a tqdm bar over simulated time
        max_steps: Optional cap on the number of steps

    Raises:
        IntegrationError: On gamma <= 0, a non-finite state or too many steps
    """
    if not dt > 0.0:
        raise IntegrationError(f"Time step must be positive, got {dt}")
    if not t_final > t0:
        raise IntegrationError(f"Final time {t_final} must exceed initial time {t0}")

    y = np.atleast_1d(np.asarray(y0, dtype=float)).copy()
    t = float(t0)
    first = TrajectoryRecord(t, y.copy(), 1.0, float(entropy(y)))
    trajectory = Trajectory(records=[first], label=label)
    advance_by_gamma = RelaxationMode(relaxation_mode) is RelaxationMode.RELAXATION
    stop_margin = 1e-8 * dt

    log_debug(f"Integrating {label or 'method'} from t={t0} to t={t_final} with dt={dt}")
    bar = tqdm(total=t_final - t0, disable=not progress, unit="t", desc=label or None, leave=False)
    with bar as pbar:
        while t_final - t > stop_margin:
            if max_steps is not None and trajectory.step_count >= max_steps:
                raise IntegrationError(f"Step limit {max_steps} reached at t={t:.12g}")
            h = min(dt, t_final - t)
            y_next, gamma = step(t, y, h)

            if not np.all(np.isfinite(y_next)):
                raise IntegrationError(f"Non-finite state at t={t:.12g}")
            if not gamma > 0.0:
                raise IntegrationError(f"Non-positive relaxation coefficient {gamma} at t={t:.12g}")

            t_next = t + gamma * h if advance_by_gamma else t + h
            y = y_next
            trajectory.records.append(TrajectoryRecord(t_next, y.copy(), gamma, float(entropy(y))))
            log_step(trajectory.step_count, t_next, h, gamma)
            pbar.update(min(t_next, t_final) - min(t, t_final))
            t = t_next
    return trajectory


def integrate(
    cfg: MethodConfig,
    problem: OdeProblem,
    t0: float,
    y0: Optional[np.ndarray],
    dt: float,
    t_final: float,
    progress: bool = False,
    max_steps: Optional[int] = None,
) -> Trajectory:
    """
    Integrate an ODE problem with a DeC or relaxed RK method.

    Args:
        cfg: DecConfig or RkConfig
        problem: The ODE
        t0: Initial time
        y0: Initial state, the problem default when None
        dt: Nominal time step
        t_final: End time
        progress: Show a tqdm bar
        max_steps: Optional cap on the number of steps

    Returns:
        Trajectory with one record per step plus the initial one
    """
    stepper = step_function(cfg)
    y0 = problem.y0 if y0 is None else y0

    def step(t: float, y: np.ndarray, h: float) -> tuple[np.ndarray, float]:
        result = stepper(cfg, problem, t, y, h)
        return result.y, result.gamma

    return march(
        step,
        problem.entropy,
        cfg.relaxation_mode,
        t0,
        y0,
        dt,
        t_final,
        label=cfg.label,
        progress=progress,
        max_steps=max_steps,
    )


class IntegrationError(Exception):
    """Raised when a time integration has to abort."""
    pass
