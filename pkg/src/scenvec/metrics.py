"""Trajectory-level evaluation metrics and dataset-level error statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from scenvec.scenario_model import EvaluationMetrics, Trajectory

# Units used as column-header suffixes in reports.
METRIC_UNITS = {"a_min": "m/s²", "p_lat_max": "m", "d_min": "m"}

# The first two Ego states (t=0, t=0.2) are model input, not prediction.
ADE_SKIP = 2


@dataclass
class ErrorReport:
    ade: float
    mae: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.ade < 0 or any(v < 0 for v in self.mae.values()):
            raise ValueError("error entries must be non-negative")


def ade(predicted: Trajectory, truth: Trajectory, skip: int = ADE_SKIP) -> float:
    """Mean Euclidean distance between positions from state ``skip`` onwards."""
    if len(predicted) != len(truth):
        raise ValueError(f"length mismatch: {len(predicted)} vs {len(truth)}")
    diff = predicted.positions[skip:] - truth.positions[skip:]
    if len(diff) == 0:
        raise ValueError("no states left to compare")
    return float(np.mean(np.hypot(diff[:, 0], diff[:, 1])))


def min_acceleration(traj: Trajectory) -> float:
    if len(traj) < 2:
        raise ValueError("need at least 2 states")
    return float(np.min(np.diff(traj.speed) / np.diff(traj.t)))


def max_lateral_position(traj: Trajectory) -> float:
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    return float(np.max(np.abs(traj.y)))


def min_distance(ego: Trajectory, co: Trajectory) -> float:
    if len(ego) != len(co) or not np.array_equal(ego.t, co.t):
        raise ValueError("trajectories do not share timestamps")
    diff = ego.positions - co.positions
    return float(np.min(np.hypot(diff[:, 0], diff[:, 1])))


def evaluation_metrics(ego: Trajectory, co: Optional[Trajectory]) -> EvaluationMetrics:
    return EvaluationMetrics(
        a_min=min_acceleration(ego),
        p_lat_max=max_lateral_position(ego),
        d_min=None if co is None else min_distance(ego, co),
    )


def mae(predicted_values: Sequence[float], true_values: Sequence[float]) -> float:
    p = np.asarray(predicted_values, dtype=float)
    t = np.asarray(true_values, dtype=float)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise ValueError("empty input")
    return float(np.mean(np.abs(p - t)))
