"""Tests for the experiment harness."""

import numpy as np
import pytest

from rdec.coeffs import CoefficientError
from rdec.dec import DecConfig, IntegrationError, RelaxationMode, RkConfig, integrate
from rdec.harness import (
    EXIT_CONFIG,
    EXIT_NUMERICAL,
    EXIT_SOLVER,
    ConfigError,
    EmptyTrajectoryError,
    Experiment,
    ExperimentConfig,
    classify_error,
    dec_rk_deviation,
    file_label,
    format_value,
    gamma_stats,
    parse_method,
    run,
)
from rdec.models import Trajectory, TrajectoryRecord
from rdec.problems import ProblemError, pendulum
from rdec.rd1d import NoPositiveRootError, RdError
from rdec.relax import NoBracketError, RelaxationError


def trajectory_with(gammas):
    records = [TrajectoryRecord(0.0, np.zeros(1), 1.0, 0.0)]
    records += [TrajectoryRecord(i + 1.0, np.zeros(1), g, 0.0) for i, g in enumerate(gammas)]
    return Trajectory(records=records)


def read_rows(path):
    return path.read_text(encoding="utf-8").strip().split("\n")


class TestGammaStats:
    def test_unit_gammas(self):
        stats = gamma_stats(trajectory_with([1.0] * 7))
        assert stats.median == stats.minimum == stats.maximum == 1.0
        assert stats.step_count == 7

    def test_three_values(self):
        stats = gamma_stats(trajectory_with([1.1, 0.9, 1.0]))
        assert stats.median == pytest.approx(1.0)
        assert stats.q1 == pytest.approx(0.95)
        assert stats.q3 == pytest.approx(1.05)
        assert (stats.minimum, stats.maximum) == (0.9, 1.1)

    def test_even_count_uses_midpoint(self):
        stats = gamma_stats(trajectory_with([1.0, 2.0, 3.0, 4.0]))
        assert stats.median == pytest.approx(2.5)

    def test_empty(self):
        with pytest.raises(EmptyTrajectoryError):
            gamma_stats(trajectory_with([]))

    def test_relaxed_pendulum_step_count(self):
        cfg = DecConfig.from_order(
            2, relaxation_mode=RelaxationMode.RELAXATION, entropy_mode="general"
        )
        trajectory = integrate(cfg, pendulum(), 0.0, None, 0.9, 1000.0)
        median = gamma_stats(trajectory).median
        assert (trajectory.step_count - 1112) * (median - 1.0) <= 0.0


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig(experiment="tableau")
        assert cfg.experiment is Experiment.TABLEAU
        assert cfg.methods == ("dec3",)
        assert cfg.root_solver.method.value == "brent"

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(experiment="nope"),
            dict(experiment="tableau", family="chebyshev"),
            dict(experiment="tableau", methods=()),
            dict(experiment="ode-run", t_final=1.0),
            dict(experiment="ode-run", dt=0.1),
            dict(experiment="ode-run", dt=-0.1, t_final=1.0),
            dict(experiment="ode-run", dt=float("nan"), t_final=1.0),
            dict(experiment="fv-burgers", t_final=0.2),
            dict(experiment="rd-transport", t_final=1.0, cfl=0.1, p=0),
            dict(experiment="rd-transport", t_final=1.0, cfl=0.1, nu=-1.0),
            dict(experiment="rd-transport", t_final=1.0, cfl=0.1, order=0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigError):
            ExperimentConfig(**kwargs)

    def test_parse_method(self):
        cfg = ExperimentConfig(experiment="tableau", relaxation="relaxation", family="gausslobatto")
        dec = parse_method("DeC4", cfg)
        assert isinstance(dec, DecConfig)
        assert dec.label == "RDeC4-GL"
        rk = parse_method("rk44", cfg)
        assert isinstance(rk, RkConfig)
        assert rk.label == "RRK44"
        for bad in ("dec0", "euler"):
            with pytest.raises(ConfigError):
                parse_method(bad, cfg)


def test_format_value():
    assert format_value(None) == ""
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(1.0)) == "1"
    assert format_value(3) == "3"
    assert file_label("RDeC3-GL p=2") == "rdec3_gl_p_2"


@pytest.mark.parametrize(
    "exc,expected",
    [
        (ConfigError("x"), (EXIT_CONFIG, "config")),
        (ProblemError("x"), (EXIT_CONFIG, "config")),
        (CoefficientError("x"), (EXIT_CONFIG, "config")),
        (NoBracketError("x"), (EXIT_SOLVER, "solver")),
        (NoPositiveRootError("x"), (EXIT_SOLVER, "solver")),
        (IntegrationError("x"), (EXIT_NUMERICAL, "numerical")),
        (RdError("x"), (EXIT_NUMERICAL, "numerical")),
    ],
)
def test_classify_error(exc, expected):
    assert classify_error(exc) == expected


def test_classify_wrapped_solver_failure():
    try:
        try:
            raise NoBracketError("no sign change")
        except RelaxationError as e:
            raise IntegrationError("Relaxation failed") from e
    except IntegrationError as wrapped:
        assert classify_error(wrapped) == (EXIT_SOLVER, "solver")


def test_dec_rk_deviation_is_roundoff():
    assert dec_rk_deviation(DecConfig.from_order(4), seed=1, samples=10) <= 1e-13


def test_tableau_run(tmp_path):
    cfg = ExperimentConfig(experiment="tableau", methods=("dec3", "ssprk33"), output_dir=tmp_path)
    result = run(cfg)
    assert [p.name for p in result.files] == ["tableau_dec3.csv", "tableau_ssprk33.csv"]
    rows = read_rows(tmp_path / "tableau_dec3.csv")
    assert rows[0] == "kind,index,c,col0,col1,col2,col3,col4"
    # 5 rows of A, b, 6 rows each of alpha and beta
    assert len(rows) == 1 + 5 + 1 + 6 + 6
    assert rows[6].startswith("b,,,0.16666666666666666,")
    b = [float(v) for v in rows[6].split(",")[3:]]
    assert b == [1 / 6, 0.0, 0.0, 4 / 6, 1 / 6]
    assert result.lines[0].startswith("DeC3 (5 stages)")
    assert any("5 stages, max relative DeC/RK deviation" in line for line in result.lines)


def test_ode_run_output(tmp_path):
    cfg = ExperimentConfig(
        experiment="ode-run",
        methods=("dec2",),
        problem="pendulum",
        dt=0.9,
        t_final=1000.0,
        output_dir=tmp_path,
    )
    result = run(cfg)
    rows = read_rows(result.files[0])
    assert result.files[0].name == "ode_run_pendulum_dec2.csv"
    assert rows[0] == "step,t,gamma,eta,eta_minus_eta0,y0,y1"
    assert len(rows) == 1 + 1112
    assert rows[1].startswith("1,0.90000000000000002,1,")
    assert rows[-1].startswith("1112,1000,1,")


def test_relaxed_ode_run_reports_gamma(tmp_path):
    cfg = ExperimentConfig(
        experiment="ode-run",
        methods=("dec3",),
        problem="damped",
        relaxation="relaxation",
        dt=0.5,
        t_final=20.0,
        output_dir=tmp_path,
    )
    result = run(cfg)
    header = read_rows(result.files[0])[0]
    assert header == "step,t,gamma,eta,eta_minus_eta0,y0,y1,eta_exact"
    assert any(line.startswith("RDeC3: gamma: median=") for line in result.lines)


def test_csv_is_deterministic(tmp_path):
    outputs = []
    for name in ("a", "b"):
        cfg = ExperimentConfig(
            experiment="ode-run",
            methods=("dec4",),
            relaxation="relaxation",
            dt=0.3,
            t_final=30.0,
            output_dir=tmp_path / name,
        )
        outputs.append(run(cfg).files[0].read_bytes())
    assert outputs[0] == outputs[1]


def test_ode_converge(tmp_path):
    cfg = ExperimentConfig(
        experiment="ode-converge",
        methods=("dec4",),
        dt=0.5,
        t_final=10.0,
        refinements=4,
        output_dir=tmp_path,
    )
    result = run(cfg)
    rows = [row.split(",") for row in read_rows(result.files[0])]
    assert rows[0] == ["dt", "error", "slope"]
    assert len(rows) == 5
    assert rows[1][2] == ""
    slopes = [float(row[2]) for row in rows[2:]]
    assert slopes[-1] >= 3.8


def test_converge_needs_exact_solution(tmp_path):
    cfg = ExperimentConfig(
        experiment="ode-converge", problem="pendulum", dt=0.5, t_final=1.0, output_dir=tmp_path
    )
    with pytest.raises(ConfigError):
        run(cfg)


def test_unknown_problem(tmp_path):
    cfg = ExperimentConfig(
        experiment="ode-run", problem="lorenz", dt=0.1, t_final=1.0, output_dir=tmp_path
    )
    with pytest.raises(ProblemError):
        run(cfg)


def test_fv_burgers_run(tmp_path):
    cfg = ExperimentConfig(
        experiment="fv-burgers",
        methods=("dec3",),
        relaxation="relaxation",
        cfl=0.3,
        t_final=0.2,
        problem_params={"N": 50},
        output_dir=tmp_path,
    )
    result = run(cfg)
    assert result.files[0].name == "fv_burgers_rdec3.csv"
    changes = [float(row.split(",")[4]) for row in read_rows(result.files[0])[1:]]
    assert max(abs(c) for c in changes) <= 1e-12


def test_rd_transport_run(tmp_path):
    cfg = ExperimentConfig(
        experiment="rd-transport",
        p=1,
        n_elem=16,
        refinements=3,
        cfl=0.1,
        t_final=0.5,
        relaxation="relaxation",
        output_dir=tmp_path,
    )
    result = run(cfg)
    names = [p.name for p in result.files]
    assert names == ["rd_transport_rdec2_p1.csv", "rd_transport_rdec2_p1_steps.csv"]
    rows = [row.split(",") for row in read_rows(result.files[0])]
    assert rows[0] == ["h", "error", "slope", "energy_deviation"]
    assert len(rows) == 4
    assert float(rows[-1][2]) >= 1.8
    assert all(float(row[3]) <= 1e-10 for row in rows[1:])
    assert read_rows(result.files[1])[0] == "step,t,gamma,energy"


def test_rd_transport_consistent_mass_conserves_mass_energy(tmp_path):
    cfg = ExperimentConfig(
        experiment="rd-transport",
        p=2,
        n_elem=16,
        refinements=2,
        t_final=0.25,
        nu=0.0,
        consistent_mass=True,
        relaxation="relaxation",
        output_dir=tmp_path,
    )
    result = run(cfg)
    assert "consistent mass, nu=0" in result.lines[0]
    rows = [row.split(",") for row in read_rows(result.files[0])]
    assert all(float(row[3]) <= 1e-12 for row in rows[1:])


def test_numerical_abort_propagates(tmp_path):
    cfg = ExperimentConfig(
        experiment="ode-run",
        methods=("dec2",),
        relaxation="relaxation",
        entropy="general",
        dt=1000.0,
        t_final=2000.0,
        output_dir=tmp_path,
    )
    with pytest.raises(IntegrationError) as info:
        run(cfg)
    assert classify_error(info.value) == (EXIT_SOLVER, "solver")
