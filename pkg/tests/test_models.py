"""Tests for the trajectory and convergence models."""

import logging

import numpy as np
import pytest

from rdec.debug import is_debug_enabled, logger, setup_debug_logging
from rdec.models import ConvergenceTable, Trajectory, TrajectoryRecord


def test_trajectory_properties():
    records = [
        TrajectoryRecord(0.0, np.array([1.0, 0.0]), 1.0, 0.5),
        TrajectoryRecord(0.5, np.array([0.9, 0.4]), 0.99, 0.485),
        TrajectoryRecord(1.0, np.array([0.6, 0.8]), 1.01, 0.5),
    ]
    trajectory = Trajectory(records=records, label="RDeC2")
    assert trajectory.step_count == 2
    np.testing.assert_allclose(trajectory.gammas, [0.99, 1.01])
    np.testing.assert_allclose(trajectory.times, [0.0, 0.5, 1.0])
    assert trajectory.states.shape == (3, 2)
    assert trajectory.max_entropy_deviation() == pytest.approx(0.015)
    assert str(trajectory) == "RDeC2: 2 steps to t=1"


def test_empty_trajectory():
    trajectory = Trajectory()
    assert trajectory.step_count == 0
    assert trajectory.max_entropy_deviation() == 0.0
    assert trajectory.gammas.size == 0


def test_convergence_table():
    table = ConvergenceTable(label="DeC3")
    first = table.add(0.2, 8e-3)
    assert first.slope is None
    table.add(0.1, 1e-3)
    table.add(0.05, 1.25e-4)
    assert table.slopes == pytest.approx([3.0, 3.0])
    assert table.fitted_slope() == pytest.approx(3.0)
    text = str(table).split("\n")
    assert text[0] == "DeC3"
    assert len(text) == 5


def test_slope_skips_zero_errors():
    table = ConvergenceTable(label="exact")
    table.add(0.2, 0.0)
    assert table.add(0.1, 0.0).slope is None


def test_debug_logging_levels(tmp_path):
    log_file = tmp_path / "debug.log"
    try:
        setup_debug_logging(enabled=True, log_file=str(log_file))
        assert is_debug_enabled()
        logger.debug("step trace")
        for handler in logger.handlers:
            handler.flush()
        assert "step trace" in log_file.read_text(encoding="utf-8")
    finally:
        setup_debug_logging(enabled=False)
    assert not is_debug_enabled()
    assert logger.level == logging.WARNING
