"""Experiment runner: configurations, CSV output, convergence tables and gamma statistics."""

import csv
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Optional

import numpy as np

from .coeffs import CoefficientError, NodeFamily
from .dec import (
    DecConfig,
    EntropyMode,
    IntegrationError,
    MethodConfig,
    RelaxationMode,
    RkConfig,
    dec_step,
    integrate,
)
from .debug import log_info
from .fv import FvError, FvGrid, burgers_problem, cfl_time_step
from .models import ConvergenceTable, GammaStats, Trajectory
from .problems import OdeProblem, ProblemError, by_name
from .rd1d import (
    CorrectionMode,
    NoPositiveRootError,
    RdError,
    RdMesh,
    RdRelaxation,
    build_operators,
    default_jump_coefficient,
    interpolate,
    l2_error,
    linear_transport_config,
    rd_integrate,
    rd_time_step,
)
from .relax import RelaxationError, RootMethod, RootSolverConfig
from .tableau import (
    TableauError,
    dec_to_butcher,
    format_tableau,
    named_tableau,
    rk_step,
    to_shu_osher,
)

# Exit statuses
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_SOLVER = 4

DEC_PATTERN = re.compile(r"^dec(\d+)$", re.IGNORECASE)


class Experiment(str, Enum):
    TABLEAU = "tableau"
    ODE_RUN = "ode-run"
    ODE_CONVERGE = "ode-converge"
    FV_BURGERS = "fv-burgers"
    RD_TRANSPORT = "rd-transport"


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything one harness run needs.

    Attributes:
        experiment: Which experiment to run
        methods: Method descriptors, "dec<d>" or a named RK method
        family: Node family of the DeC methods
        relaxation: Relaxation mode
        entropy: Entropy mode of the ODE relaxation
        root_method: Root solver of the General entropy mode
        dt: Time step (coarsest step for convergence studies)
        cfl: CFL number, used when dt is not given
        t_final: End time
        problem: Problem name for the ODE experiments
        problem_params: Keyword parameters of the problem factory
        output_dir: Directory for the CSV files
        seed: Seed of the randomized equivalence check
        samples: Number of random right-hand sides in the equivalence check
        refinements: Number of refinement levels
        p: RD polynomial degree
        n_elem: RD elements on the coarsest level
        order: RD DeC order, defaults to p+1
        nu: RD jump stabilization coefficient, by degree when omitted
        consistent_mass: RD with the consistent mass matrix instead of cubature elements
        correction: RD entropy correction
        rd_relaxation: RD relaxation target
    """

    experiment: Experiment
    methods: tuple[str, ...] = ("dec3",)
    family: NodeFamily = NodeFamily.EQUISPACED
    relaxation: RelaxationMode = RelaxationMode.NONE
    entropy: EntropyMode = EntropyMode.ENERGY
    root_method: RootMethod = RootMethod.BRENT
    dt: Optional[float] = None
    cfl: Optional[float] = None
    t_final: Optional[float] = None
    problem: str = "oscillator"
    problem_params: dict[str, Any] = field(default_factory=dict)
    output_dir: Path = Path(".")
    seed: int = 0
    samples: int = 50
    refinements: int = 5
    p: int = 1
    n_elem: int = 16
    order: Optional[int] = None
    nu: Optional[float] = None
    consistent_mass: bool = False
    correction: CorrectionMode = CorrectionMode.CONSERVATIVE
    rd_relaxation: RdRelaxation = RdRelaxation.CONSERVATIVE

    def __post_init__(self):
        try:
            for name, kind in (
                ("experiment", Experiment),
                ("family", NodeFamily),
                ("relaxation", RelaxationMode),
                ("entropy", EntropyMode),
                ("root_method", RootMethod),
                ("correction", CorrectionMode),
                ("rd_relaxation", RdRelaxation),
            ):
                object.__setattr__(self, name, kind(getattr(self, name)))
        except ValueError as e:
            raise ConfigError(str(e)) from e
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "output_dir", Path(self.output_dir))

        if not self.methods:
            raise ConfigError("At least one method is required")
        for name in ("dt", "cfl", "t_final"):
            value = getattr(self, name)
            if value is not None and not (np.isfinite(value) and value > 0.0):
                raise ConfigError(f"{name} must be positive, got {value}")
        for name in ("refinements", "p", "n_elem", "samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.order is not None and self.order < 1:
            raise ConfigError(f"order must be >= 1, got {self.order}")
        if self.nu is not None and not self.nu >= 0.0:
            raise ConfigError(f"nu must be nonnegative, got {self.nu}")

        needs = {
            Experiment.ODE_RUN: ("dt", "t_final"),
            Experiment.ODE_CONVERGE: ("dt", "t_final"),
            Experiment.FV_BURGERS: ("t_final",),
            Experiment.RD_TRANSPORT: ("t_final",),
        }.get(self.experiment, ())
        missing = [name for name in needs if getattr(self, name) is None]
        if missing:
            raise ConfigError(f"{self.experiment.value} requires {', '.join(missing)}")
        if self.experiment in (Experiment.FV_BURGERS, Experiment.RD_TRANSPORT):
            if self.dt is None and self.cfl is None:
                raise ConfigError(f"{self.experiment.value} requires dt or cfl")

    @property
    def root_solver(self) -> RootSolverConfig:
        return RootSolverConfig(method=self.root_method)


@dataclass
class RunResult:
    """Exit status, written files and the summary lines of a run."""

    status: int = EXIT_OK
    files: list[Path] = field(default_factory=list)
    lines: list[str] = field(default_factory=list)


def parse_method(name: str, cfg: ExperimentConfig) -> MethodConfig:
    """
    Turn a method descriptor into a method configuration.

    Raises:
        ConfigError: If the descriptor is unknown
    """
    match = DEC_PATTERN.match(name.strip())
    try:
        if match:
            return DecConfig.from_order(
                int(match.group(1)),
                family=cfg.family,
                relaxation_mode=cfg.relaxation,
                entropy_mode=cfg.entropy,
                root_solver=cfg.root_solver,
            )
        named_tableau(name.strip())
        return RkConfig(
            method=name.strip().lower(),
            relaxation_mode=cfg.relaxation,
            entropy_mode=cfg.entropy,
            root_solver=cfg.root_solver,
        )
    except (TableauError, IntegrationError) as e:
        raise ConfigError(f"Invalid method '{name}': {e}") from e


def gamma_stats(trajectory: Trajectory) -> GammaStats:
    """
    Median, quartiles and extremes of the per-step gamma values.

    Raises:
        EmptyTrajectoryError: If the trajectory has no steps
    """
    gammas = trajectory.gammas
    if gammas.size == 0:
        raise EmptyTrajectoryError("Trajectory has no steps")
    q1, median, q3 = np.percentile(gammas, [25.0, 50.0, 75.0])
    return GammaStats(
        median=float(median),
        q1=float(q1),
        q3=float(q3),
        minimum=float(gammas.min()),
        maximum=float(gammas.max()),
        step_count=trajectory.step_count,
    )


def format_value(value: Any) -> str:
    """CSV cell: floats with 17 significant digits, None as empty."""
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> Path:
    """Write a CSV file with a header row."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    log_info(f"Wrote {path}")
    return path


def file_label(label: str) -> str:
    return re.sub(r"[^0-9a-z]+", "_", label.lower()).strip("_")


def trajectory_rows(trajectory: Trajectory, problem: Optional[OdeProblem] = None):
    """
    Rows of step, t, gamma, eta, eta - eta0, state components[, eta_exact].

    One row per step; the initial record only provides eta0.
    """
    eta0 = trajectory.records[0].eta
    exact = problem.entropy_exact if problem is not None else None
    for step, record in enumerate(trajectory.records[1:], start=1):
        row = [step, record.t, record.gamma, record.eta, record.eta - eta0]
        row += [float(v) for v in record.y]
        if exact is not None:
            row.append(float(exact(record.t)))
        yield row


def classify_error(exc: BaseException) -> tuple[int, str]:
    """Exit status and diagnostic kind of an aborted run."""
    if isinstance(exc, (ConfigError, ProblemError, TableauError, CoefficientError, FvError)):
        return EXIT_CONFIG, "config"
    if isinstance(exc, (RelaxationError, NoPositiveRootError)):
        return EXIT_SOLVER, "solver"
    if isinstance(exc, (IntegrationError, RdError)):
        if isinstance(exc.__cause__, RelaxationError):
            return EXIT_SOLVER, "solver"
        return EXIT_NUMERICAL, "numerical"
    return EXIT_NUMERICAL, "numerical"


def run(cfg: ExperimentConfig, progress: bool = False) -> RunResult:
    """
    Run one experiment and write its CSV files into cfg.output_dir.

    Raises:
        ConfigError: For invalid settings; numerical and solver failures
            propagate as IntegrationError, RdError or RelaxationError
    """
    runners = {
        Experiment.TABLEAU: _run_tableau,
        Experiment.ODE_RUN: _run_ode,
        Experiment.ODE_CONVERGE: _run_converge,
        Experiment.FV_BURGERS: _run_fv_burgers,
        Experiment.RD_TRANSPORT: _run_rd_transport,
    }
    result = RunResult()
    runners[cfg.experiment](cfg, result, progress)
    return result


def _run_tableau(cfg: ExperimentConfig, result: RunResult, progress: bool) -> None:
    for name in cfg.methods:
        method = parse_method(name, cfg)
        if isinstance(method, DecConfig):
            tableau = dec_to_butcher(method.M, method.K, method.family)
            label = method.label
        else:
            tableau = method.tableau
            label = tableau.name
        form = to_shu_osher(tableau)

        result.lines.append(format_tableau(tableau))
        result.lines.append(_format_matrix("Shu-Osher alpha", form.alpha))
        result.lines.append(_format_matrix("Shu-Osher beta", form.beta))

        s = tableau.stages
        header = ["kind", "index", "c"] + [f"col{j}" for j in range(s)]
        rows = [["A", i, tableau.c[i], *tableau.A[i]] for i in range(s)]
        rows.append(["b", None, None, *tableau.b])
        rows += [["alpha", i, None, *form.alpha[i]] for i in range(s + 1)]
        rows += [["beta", i, None, *form.beta[i]] for i in range(s + 1)]
        path = cfg.output_dir / f"tableau_{file_label(label)}.csv"
        result.files.append(write_csv(path, header, rows))

        if isinstance(method, DecConfig):
            deviation = dec_rk_deviation(method, cfg.seed, cfg.samples)
            result.lines.append(
                f"{label}: {s} stages, max relative DeC/RK deviation over "
                f"{cfg.samples} random fields = {deviation:.3e}"
            )


def _format_matrix(title: str, matrix: np.ndarray) -> str:
    rows = ["".join(f"{x:>13.6g}" for x in row) for row in matrix]
    return "\n".join([title] + rows)


def dec_rk_deviation(method: DecConfig, seed: int, samples: int, dim: int = 3) -> float:
    """
    Largest relative difference between dec_step and rk_step on random fields.

    The fields are y' = tanh(L y) + c with Gaussian L and c.
    """
    rng = np.random.default_rng(seed)
    unrelaxed = DecConfig(M=method.M, K=method.K, family=method.family)
    tableau = dec_to_butcher(method.M, method.K, method.family)
    worst = 0.0
    for _ in range(samples):
        L = rng.normal(size=(dim, dim))
        c = rng.normal(size=dim)
        y0 = rng.normal(size=dim)

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            return np.tanh(L @ y) + c

        problem = OdeProblem(
            name="random",
            dim=dim,
            rhs=rhs,
            entropy=lambda y: 0.5 * float(np.dot(y, y)),
            entropy_derivative=lambda y: y,
            y0=y0,
            conservative=False,
        )
        y_dec = dec_step(unrelaxed, problem, 0.0, y0, 0.1).y
        y_rk = rk_step(tableau, rhs, 0.0, y0, 0.1).y_next
        worst = max(worst, float(np.linalg.norm(y_dec - y_rk) / np.linalg.norm(y_rk)))
    return worst


def _problem(cfg: ExperimentConfig) -> OdeProblem:
    return by_name(cfg.problem, **cfg.problem_params)


def _run_ode(cfg: ExperimentConfig, result: RunResult, progress: bool) -> None:
    problem = _problem(cfg)
    for name in cfg.methods:
        method = parse_method(name, cfg)
        trajectory = integrate(method, problem, 0.0, None, cfg.dt, cfg.t_final, progress=progress)

        header = ["step", "t", "gamma", "eta", "eta_minus_eta0"]
        header += [f"y{i}" for i in range(problem.dim)]
        if problem.entropy_exact is not None:
            header.append("eta_exact")
        path = cfg.output_dir / f"ode_run_{problem.name}_{file_label(method.label)}.csv"
        result.files.append(write_csv(path, header, trajectory_rows(trajectory, problem)))

        result.lines.append(str(trajectory))
        result.lines.append(
            f"{method.label}: max |eta - eta0| = {trajectory.max_entropy_deviation():.3e}"
        )
        if method.relaxation_mode is not RelaxationMode.NONE:
            result.lines.append(f"{method.label}: {gamma_stats(trajectory)}")


def _run_converge(cfg: ExperimentConfig, result: RunResult, progress: bool) -> None:
    problem = _problem(cfg)
    if problem.exact is None:
        raise ConfigError(f"Problem '{problem.name}' has no exact solution")
    for name in cfg.methods:
        method = parse_method(name, cfg)
        table = ConvergenceTable(label=f"{method.label} on {problem.name}")
        for level in range(cfg.refinements):
            dt = cfg.dt / 2**level
            trajectory = integrate(method, problem, 0.0, None, dt, cfg.t_final, progress=progress)
            final = trajectory.final
            table.add(dt, float(np.linalg.norm(final.y - problem.exact(final.t))))

        path = cfg.output_dir / f"ode_converge_{problem.name}_{file_label(method.label)}.csv"
        rows = ([r.step, r.error, r.slope] for r in table.rows)
        result.files.append(write_csv(path, ["dt", "error", "slope"], rows))
        result.lines.append(str(table))


def _run_fv_burgers(cfg: ExperimentConfig, result: RunResult, progress: bool) -> None:
    N = int(cfg.problem_params.get("N", 100))
    problem = burgers_problem(N)
    dt = cfg.dt or cfl_time_step(FvGrid(N), problem.y0, cfg.cfl)
    for name in cfg.methods:
        method = parse_method(name, cfg)
        trajectory = integrate(method, problem, 0.0, None, dt, cfg.t_final, progress=progress)
        path = cfg.output_dir / f"fv_burgers_{file_label(method.label)}.csv"
        header = ["step", "t", "gamma", "eta", "eta_minus_eta0"]
        rows = (row[:5] for row in trajectory_rows(trajectory))
        result.files.append(write_csv(path, header, rows))

        change = trajectory.final.eta - trajectory.records[0].eta
        result.lines.append(
            f"{method.label}: {trajectory.step_count} steps, dt={dt:.6g}, "
            f"eta(T) - eta(0) = {change:.3e}"
        )


def transport_initial_condition(x: np.ndarray) -> np.ndarray:
    return 0.1 * np.sin(np.pi * x)


def _run_rd_transport(cfg: ExperimentConfig, result: RunResult, progress: bool) -> None:
    order = cfg.order or cfg.p + 1
    dec_cfg = DecConfig.from_order(order, family=cfg.family, relaxation_mode=cfg.relaxation)
    nu = default_jump_coefficient(cfg.p) if cfg.nu is None else cfg.nu
    residual_cfg = linear_transport_config(a=1.0, correction=cfg.correction, nu=nu)
    label = f"{dec_cfg.label}_p{cfg.p}"
    elements = "consistent mass" if cfg.consistent_mass else "cubature"
    table = ConvergenceTable(
        label=f"{dec_cfg.label}, p={cfg.p}, {elements}, nu={nu:g}, {residual_cfg.name}"
    )

    trajectory = None
    for level in range(cfg.refinements):
        mesh = RdMesh(n_elem=cfg.n_elem * 2**level, p=cfg.p)
        ops = build_operators(mesh, lumped_mass=not cfg.consistent_mass)
        dt = cfg.dt / 2**level if cfg.dt else rd_time_step(mesh, cfg.cfl, ops=ops, nu=nu)
        U0 = interpolate(mesh, transport_initial_condition)
        trajectory = rd_integrate(
            mesh,
            ops,
            residual_cfg,
            dec_cfg,
            U0,
            dt,
            cfg.t_final,
            variant=cfg.rd_relaxation,
            progress=progress,
        )
        t_end = trajectory.final.t
        error = l2_error(
            mesh, ops, trajectory.final.y, lambda x: transport_initial_condition(x - t_end)
        )
        table.add(mesh.h, error)
        eta0 = trajectory.records[0].eta
        table.energy_deviation.append(trajectory.max_entropy_deviation() / eta0)

    path = cfg.output_dir / f"rd_transport_{file_label(label)}.csv"
    rows = (
        [r.step, r.error, r.slope, dev] for r, dev in zip(table.rows, table.energy_deviation)
    )
    result.files.append(write_csv(path, ["h", "error", "slope", "energy_deviation"], rows))

    steps_path = cfg.output_dir / f"rd_transport_{file_label(label)}_steps.csv"
    step_rows = (row[:4] for row in trajectory_rows(trajectory))
    result.files.append(write_csv(steps_path, ["step", "t", "gamma", "energy"], step_rows))

    result.lines.append(str(table))
    for row, dev in zip(table.rows, table.energy_deviation):
        result.lines.append(f"h={row.step:.5e}: relative energy deviation {dev:.3e}")


class ConfigError(ValueError):
    """Raised for invalid or incomplete experiment settings."""
    pass


class EmptyTrajectoryError(ValueError):
    """Raised when statistics are requested for a trajectory without steps."""
    pass


# Errors the CLI turns into an exit status and a one-line diagnostic
HANDLED_ERRORS = (
    ConfigError,
    ProblemError,
    TableauError,
    CoefficientError,
    FvError,
    IntegrationError,
    RdError,
    RelaxationError,
)
