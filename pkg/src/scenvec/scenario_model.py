"""Shared domain types for the three functional scenarios and their invariant checks."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

NUM_LANE_POINTS = 25
NUM_STATES = 26
DT = 0.2
LANE_X_MIN = -55.0
LANE_X_MAX = 55.0
LANE_WIDTH = 3.5


class ScenarioKind(str, enum.Enum):
    ACC = "ACC"
    LK = "LK"
    ACC_AND_LK = "ACC_AND_LK"

    @property
    def has_co(self) -> bool:
        return self is not ScenarioKind.LK

    @property
    def has_curvature(self) -> bool:
        return self is not ScenarioKind.ACC

    @property
    def code(self) -> int:
        return list(ScenarioKind).index(self)


# (name, low, high) in input-table order. Dependent bounds are functions of v_ego.
CURVATURE_RANGES = (
    ("a0", -1.0, 1.0),
    ("a1", -0.1, 0.1),
    ("a2", -0.01, 0.01),
    ("a3", -0.001, 0.001),
)
V_EGO_RANGE = (8.0, 16.0)
T_V_CO_RANGE = (0.0, 3.0)
A_CO_RANGE = (-8.0, -1.0)
T_A_CO_RANGE = (1.0, 3.0)


def x_co_range(v_ego: float) -> tuple[float, float]:
    return -50.0 + v_ego, -50.0 + 2.0 * v_ego


def v_co_range(v_ego: float) -> tuple[float, float]:
    return v_ego - 4.0, v_ego + 4.0


CO_FIELDS = ("x_co", "v_co", "t_v_co", "a_co", "t_a_co")


@dataclass(frozen=True)
class ConcreteScenario:
    """One parameterization of a logical scenario.

    Construction does not enforce the input ranges; use :func:`validate` to
    list violations. ``master_seed`` and ``index`` identify the record within
    its generated dataset, ``seed`` keys every noise substream.
    """

    kind: ScenarioKind
    v_ego: float
    a0: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    x_co: Optional[float] = None
    v_co: Optional[float] = None
    t_v_co: Optional[float] = None
    a_co: Optional[float] = None
    t_a_co: Optional[float] = None
    seed: int = 0
    master_seed: int = 0
    index: int = 0

    @property
    def coefficients(self) -> tuple[float, float, float, float]:
        return self.a0, self.a1, self.a2, self.a3

    @property
    def identity(self) -> tuple[str, int, int]:
        return self.kind.value, self.master_seed, self.index


@dataclass(frozen=True, eq=False)
class LaneGeometry:
    sample_x: np.ndarray
    center_y: np.ndarray
    half_width: float

    @property
    def left_y(self) -> np.ndarray:
        return self.center_y + self.half_width

    @property
    def right_y(self) -> np.ndarray:
        return self.center_y - self.half_width

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LaneGeometry):
            return NotImplemented
        return (
            np.array_equal(self.sample_x, other.sample_x)
            and np.array_equal(self.center_y, other.center_y)
            and self.half_width == other.half_width
        )


def lane_sample_x() -> np.ndarray:
    return LANE_X_MIN + (LANE_X_MAX - LANE_X_MIN) / (NUM_LANE_POINTS - 1) * np.arange(NUM_LANE_POINTS)


def polynomial(coefficients, x):
    a0, a1, a2, a3 = coefficients
    return a0 + a1 * x + a2 * x**2 + a3 * x**3


@dataclass(frozen=True)
class VehicleState:
    t: float
    x: float
    y: float
    heading: float
    speed: float


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed vehicle states stored as an ``(n, 5)`` array of t, x, y, heading, speed."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 5:
            raise ValueError(f"trajectory array must have shape (n, 5), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_states(cls, states) -> "Trajectory":
        return cls(np.array([[s.t, s.x, s.y, s.heading, s.speed] for s in states], dtype=float).reshape(-1, 5))

    @property
    def states(self) -> list[VehicleState]:
        return [VehicleState(*map(float, row)) for row in self.data]

    def __len__(self) -> int:
        return len(self.data)

    @property
    def t(self) -> np.ndarray:
        return self.data[:, 0]

    @property
    def x(self) -> np.ndarray:
        return self.data[:, 1]

    @property
    def y(self) -> np.ndarray:
        return self.data[:, 2]

    @property
    def heading(self) -> np.ndarray:
        return self.data[:, 3]

    @property
    def speed(self) -> np.ndarray:
        return self.data[:, 4]

    @property
    def positions(self) -> np.ndarray:
        return self.data[:, 1:3]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.data, other.data)


@dataclass(frozen=True)
class EvaluationMetrics:
    a_min: float
    p_lat_max: float
    d_min: Optional[float] = None

    def as_dict(self) -> dict[str, float]:
        out = {"a_min": self.a_min, "p_lat_max": self.p_lat_max}
        if self.d_min is not None:
            out["d_min"] = self.d_min
        return out


@dataclass(frozen=True)
class SceneRecord:
    scenario: ConcreteScenario
    lanes: LaneGeometry
    ego: Trajectory
    co: Optional[Trajectory]
    metrics: EvaluationMetrics = field(compare=True)

    @property
    def kind(self) -> ScenarioKind:
        return self.scenario.kind


def _fmt(v: float) -> str:
    return f"{v:g}"


def validate_scenario(s: ConcreteScenario) -> list[str]:
    problems = []
    lo, hi = V_EGO_RANGE
    if not lo <= s.v_ego <= hi:
        problems.append(f"v_ego outside [{_fmt(lo)},{_fmt(hi)}]")
    for name, lo, hi in CURVATURE_RANGES:
        value = getattr(s, name)
        if not s.kind.has_curvature and value != 0.0:
            problems.append(f"{name} must be 0 for {s.kind.value}")
        elif not lo <= value <= hi:
            problems.append(f"{name} outside [{_fmt(lo)},{_fmt(hi)}]")
    co_values = {name: getattr(s, name) for name in CO_FIELDS}
    if not s.kind.has_co:
        present = [n for n, v in co_values.items() if v is not None]
        if present:
            problems.append(f"LK scenario carries Co fields {present}")
        return problems
    missing = [n for n, v in co_values.items() if v is None]
    if missing:
        problems.append(f"missing Co fields {missing}")
        return problems
    bounds = {
        "x_co": x_co_range(s.v_ego),
        "v_co": v_co_range(s.v_ego),
        "t_v_co": T_V_CO_RANGE,
        "a_co": A_CO_RANGE,
        "t_a_co": T_A_CO_RANGE,
    }
    for name, (lo, hi) in bounds.items():
        if not lo <= co_values[name] <= hi:
            problems.append(f"{name} outside [{_fmt(lo)},{_fmt(hi)}]")
    return problems


def validate_lanes(lanes: LaneGeometry, coefficients) -> list[str]:
    problems = []
    if lanes.sample_x.shape != (NUM_LANE_POINTS,) or lanes.center_y.shape != (NUM_LANE_POINTS,):
        return [f"lane geometry must hold {NUM_LANE_POINTS} sample points"]
    if not np.allclose(lanes.sample_x, lane_sample_x(), rtol=0, atol=1e-9):
        problems.append("lane sample_x off the fixed grid")
    offset = np.abs(lanes.center_y - polynomial(coefficients, lanes.sample_x))
    if offset.max() > 0.5 + 1e-12:
        problems.append(f"lane center offset {offset.max():.3f} exceeds 0.5 m")
    if abs(2 * lanes.half_width - LANE_WIDTH) > 0.3 + 1e-12:
        problems.append(f"lane width {2 * lanes.half_width:.3f} outside 3.5 ± 0.3 m")
    return problems


def validate_trajectory(traj: Trajectory, name: str) -> list[str]:
    if len(traj) != NUM_STATES:
        return [f"trajectory length {len(traj)} ≠ {NUM_STATES}"]
    problems = []
    steps = np.diff(traj.t)
    if np.any(np.abs(steps - DT) > 1e-12) or abs(traj.t[0]) > 1e-12:
        problems.append(f"{name} timestamps not on the {DT} s grid")
    if np.any(traj.speed < 0):
        problems.append(f"{name} has negative speed")
    return problems


def validate(record: SceneRecord) -> list[str]:
    """Return every invariant violation of ``record``; an empty list means valid."""
    from scenvec.metrics import evaluation_metrics

    s = record.scenario
    problems = validate_scenario(s)
    problems += validate_lanes(record.lanes, s.coefficients)
    problems += validate_trajectory(record.ego, "ego")
    if s.kind.has_co:
        if record.co is None:
            problems.append("Co trajectory missing")
        else:
            problems += validate_trajectory(record.co, "co")
    elif record.co is not None:
        problems.append("LK record carries a Co trajectory")
    m = record.metrics
    if m.p_lat_max < 0:
        problems.append("p_lat_max negative")
    if m.d_min is not None and m.d_min < 0:
        problems.append("d_min negative")
    if s.kind.has_co != (m.d_min is not None):
        problems.append("d_min presence does not match scenario kind")
    if not problems:
        if evaluation_metrics(record.ego, record.co) != m:
            problems.append("stored metrics differ from recomputation")
    return problems
