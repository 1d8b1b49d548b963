"""Data models for trajectories, convergence tables and gamma statistics."""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class TrajectoryRecord:
    """One accepted step: time, state, relaxation coefficient and entropy."""

    t: float
    y: np.ndarray
    gamma: float
    eta: float

    def __str__(self) -> str:
        return f"t={self.t:.6g} gamma={self.gamma:.15g} eta={self.eta:.15g}"


@dataclass
class Trajectory:
    """Recorded time history of one integration; records[0] is the initial state."""

    records: list[TrajectoryRecord] = field(default_factory=list)
    label: str = ""

    @property
    def step_count(self) -> int:
        """Number of steps taken (the initial record is not a step)."""
        return max(len(self.records) - 1, 0)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    @property
    def states(self) -> np.ndarray:
        return np.array([r.y for r in self.records])

    @property
    def gammas(self) -> np.ndarray:
        """Per-step gamma values, without the initial record."""
        return np.array([r.gamma for r in self.records[1:]])

    @property
    def etas(self) -> np.ndarray:
        return np.array([r.eta for r in self.records])

    @property
    def final(self) -> TrajectoryRecord:
        return self.records[-1]

    def max_entropy_deviation(self) -> float:
        """max_n |eta(y_n) - eta(y_0)|."""
        etas = self.etas
        return float(np.max(np.abs(etas - etas[0]))) if len(etas) else 0.0

    def __str__(self) -> str:
        return f"{self.label or 'Trajectory'}: {self.step_count} steps to t={self.final.t:.6g}"


@dataclass
class ConvergenceRow:
    """Step size (dt or h), error and slope against the previous row."""

    step: float
    error: float
    slope: Optional[float] = None


@dataclass
class ConvergenceTable:
    """Errors over a refinement sequence."""

    label: str
    rows: list[ConvergenceRow] = field(default_factory=list)
    energy_deviation: list[float] = field(default_factory=list)

    def add(self, step: float, error: float) -> ConvergenceRow:
        """Append a row and compute its observed slope."""
        slope = None
        if self.rows:
            prev = self.rows[-1]
            if prev.error > 0.0 and error > 0.0:
                slope = float(np.log(prev.error / error) / np.log(prev.step / step))
        row = ConvergenceRow(step=step, error=error, slope=slope)
        self.rows.append(row)
        return row

    @property
    def slopes(self) -> list[float]:
        return [r.slope for r in self.rows if r.slope is not None]

    def fitted_slope(self) -> float:
        """Least-squares slope of log(error) against log(step)."""
        steps = np.array([r.step for r in self.rows])
        errors = np.array([r.error for r in self.rows])
        return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])

    def __str__(self) -> str:
        lines = [f"{self.label}", f"{'step':>12} {'error':>12} {'slope':>7}"]
        for r in self.rows:
            slope = f"{r.slope:7.3f}" if r.slope is not None else " " * 7
            lines.append(f"{r.step:12.5e} {r.error:12.5e} {slope}")
        return "\n".join(lines)


@dataclass
class GammaStats:
    """Order statistics of the per-step gamma values of one run."""

    median: float
    q1: float
    q3: float
    minimum: float
    maximum: float
    step_count: int

    def __str__(self) -> str:
        return (
            f"gamma: median={self.median:.15g} q1={self.q1:.15g} q3={self.q3:.15g} "
            f"min={self.minimum:.15g} max={self.maximum:.15g} steps={self.step_count}"
        )
