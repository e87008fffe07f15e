"""Scene records to polylines of 7-feature vectors, and predicted displacements back to trajectories."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from scenvec.scenario_model import DT, NUM_LANE_POINTS, NUM_STATES, SceneRecord, Trajectory

LANE, CO, EGO = 0, 1, 2
NUM_FEATURES = 7
TARGET_STEPS = NUM_STATES - 2


class SceneVector(NamedTuple):
    x_start: float
    y_start: float
    x_end: float
    y_end: float
    object_type: int
    object_id: int
    timestamp: float


@dataclass(frozen=True, eq=False)
class Polyline:
    object_id: int
    object_type: int
    vectors: np.ndarray  # (n, 7) rows in SceneVector field order

    def __len__(self) -> int:
        return len(self.vectors)

    def vector(self, i: int) -> SceneVector:
        row = self.vectors[i]
        return SceneVector(*row[:4].tolist(), int(row[4]), int(row[5]), float(row[6]))


@dataclass(frozen=True, eq=False)
class VectorizedScene:
    polylines: list[Polyline]
    ego_target: np.ndarray  # (24, 2) displacements
    normalization_offset: tuple[float, float]

    @property
    def num_vectors(self) -> int:
        return sum(len(p) for p in self.polylines)

    @property
    def ego_index(self) -> int:
        return next(i for i, p in enumerate(self.polylines) if p.object_type == EGO)

    @property
    def ego_vector(self) -> np.ndarray:
        return self.polylines[self.ego_index].vectors[0]


def _polyline(points: np.ndarray, times: np.ndarray, object_type: int, object_id: int) -> Polyline:
    n = len(points) - 1
    vecs = np.empty((n, NUM_FEATURES))
    vecs[:, 0:2] = points[:-1]
    vecs[:, 2:4] = points[1:]
    vecs[:, 4] = object_type
    vecs[:, 5] = object_id
    vecs[:, 6] = times
    return Polyline(object_id, object_type, vecs)


def vectorize(record: SceneRecord) -> VectorizedScene:
    origin = record.ego.positions[0]
    lanes = record.lanes
    polylines = []
    for y in (lanes.left_y, lanes.right_y):
        pts = np.column_stack([lanes.sample_x, y]) - origin
        polylines.append(_polyline(pts, np.zeros(len(pts) - 1), LANE, len(polylines)))
    if record.co is not None:
        polylines.append(_polyline(record.co.positions - origin, record.co.t[1:], CO, len(polylines)))
    ego_pts = record.ego.positions - origin
    polylines.append(_polyline(ego_pts[:2], record.ego.t[1:2], EGO, len(polylines)))
    return VectorizedScene(
        polylines=polylines,
        ego_target=np.diff(ego_pts[1:], axis=0),
        normalization_offset=(float(origin[0]), float(origin[1])),
    )


def feature_matrix(scene: VectorizedScene) -> np.ndarray:
    """Stack all vectors: lanes by object_id, then the Co, then the Ego."""
    if any(len(p) == 0 for p in scene.polylines) or not scene.polylines:
        raise ValueError("scene contains an empty polyline")
    order = sorted(scene.polylines, key=lambda p: ({LANE: 0, CO: 1, EGO: 2}[p.object_type], p.object_id))
    return np.concatenate([p.vectors for p in order], axis=0)


def reconstruct_trajectory(scene: VectorizedScene, predicted, dt: float = DT) -> Trajectory:
    """Rebuild the 26-state Ego trajectory from the input vector and 24 predicted displacements.

    Heading and speed of state k describe the displacement leaving it; the last
    state repeats the final displacement's values.
    """
    predicted = np.asarray(predicted, dtype=float)
    if predicted.shape != (TARGET_STEPS, 2):
        raise ValueError(f"expected ({TARGET_STEPS}, 2) displacements, got {predicted.shape}")
    ev = scene.ego_vector
    steps = np.concatenate([[ev[2:4] - ev[0:2]], predicted])
    pos = np.concatenate([[ev[0:2]], ev[0:2] + np.cumsum(steps, axis=0)]) + np.asarray(scene.normalization_offset)
    steps = np.concatenate([steps, steps[-1:]])
    data = np.column_stack([
        np.arange(NUM_STATES) * dt,
        pos,
        np.arctan2(steps[:, 1], steps[:, 0]),
        np.hypot(steps[:, 0], steps[:, 1]) / dt,
    ])
    return Trajectory(data)


def expected_feature_count(has_co: bool) -> int:
    lane_vectors = 2 * (NUM_LANE_POINTS - 1)
    return (lane_vectors + (NUM_STATES - 1 if has_co else 0) + 1) * NUM_FEATURES
