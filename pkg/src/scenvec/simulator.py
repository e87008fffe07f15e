"""Ground-truth Ego/Co trajectories: kinematic bicycle + pure pursuit + time-gap P-controller."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from scenvec.metrics import evaluation_metrics
from scenvec.sampler import substream
from scenvec.scenario_model import (
    ConcreteScenario,
    LaneGeometry,
    SceneRecord,
    Trajectory,
    VehicleState,
)


@dataclass(frozen=True)
class SimParams:
    dt: float = 0.2
    horizon: float = 5.0
    acc_gain: float = 0.3
    time_gap: float = 2.0
    accel_bounds: tuple[float, float] = (-8.0, 2.0)
    wheelbase: float = 2.8
    lookahead_min: float = 5.0
    lookahead_factor: float = 0.5
    ego_x0: float = -50.0
    orientation_noise_bound: float = math.radians(2.9)
    co_speed_noise_bound: float = 0.1

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("horizon must be an integer multiple of dt")
        lo, hi = self.accel_bounds
        if not lo < 0 < hi:
            raise ValueError("accel_bounds must straddle zero")

    @property
    def num_steps(self) -> int:
        return int(round(self.horizon / self.dt))


class Centerline:
    """Piecewise-linear centerline through the noisy lane sample points.

    Arc-length queries past either end extrapolate along the first/last segment.
    """

    def __init__(self, lanes: LaneGeometry):
        self.points = np.column_stack([lanes.sample_x, lanes.center_y])
        seg = np.diff(self.points, axis=0)
        self.seg_len = np.hypot(seg[:, 0], seg[:, 1])
        self.seg_dir = seg / self.seg_len[:, None]
        self.cum = np.concatenate([[0.0], np.cumsum(self.seg_len)])

    def _segment_of_s(self, s: float) -> int:
        return int(np.clip(np.searchsorted(self.cum, s, side="right") - 1, 0, len(self.seg_len) - 1))

    def point_at(self, s: float) -> np.ndarray:
        i = self._segment_of_s(s)
        return self.points[i] + (s - self.cum[i]) * self.seg_dir[i]

    def heading_at(self, s: float) -> float:
        d = self.seg_dir[self._segment_of_s(s)]
        return math.atan2(d[1], d[0])

    def arclength_at_x(self, x: float) -> float:
        xs = self.points[:, 0]
        i = int(np.clip(np.searchsorted(xs, x, side="right") - 1, 0, len(self.seg_len) - 1))
        u = (x - xs[i]) / (xs[i + 1] - xs[i])
        return float(self.cum[i] + u * self.seg_len[i])

    def lookahead_point(self, pos: np.ndarray, distance: float) -> np.ndarray:
        """First point ahead of the projection of ``pos`` at Euclidean ``distance`` from it."""
        a = self.points[:-1]
        d = self.seg_dir
        rel = pos - a
        u_proj = np.clip(np.einsum("ij,ij->i", rel, d), 0.0, self.seg_len)
        foot = a + u_proj[:, None] * d
        dist2 = np.sum((pos - foot) ** 2, axis=1)
        j0 = int(np.argmin(dist2))
        # |a + u d - pos|^2 = distance^2 with |d| = 1
        b = -np.einsum("ij,ij->i", rel, d)
        c = np.sum(rel**2, axis=1) - distance**2
        disc = b * b - c
        ok = disc >= 0
        root = np.where(ok, -b + np.sqrt(np.where(ok, disc, 0.0)), -np.inf)
        lo = np.zeros_like(root)
        lo[j0] = u_proj[j0]
        valid = ok & (root >= lo) & (root <= self.seg_len)
        valid[:j0] = False
        hits = np.flatnonzero(valid)
        if len(hits):
            j = hits[0]
            return a[j] + root[j] * d[j]
        if dist2[j0] > distance**2:
            # vehicle farther than the lookahead from the road: chase the path ahead
            s = self.cum[j0] + u_proj[j0] + distance
            return self.point_at(min(s, self.cum[-1]))
        return self.points[-1].copy()


def co_speed_profile(t: float, scenario: ConcreteScenario) -> float:
    if not scenario.kind.has_co or scenario.v_co is None:
        raise ValueError("scenario has no Co")
    v, t_v, a, t_a = scenario.v_co, scenario.t_v_co, scenario.a_co, scenario.t_a_co
    if t < t_v:
        return v
    return max(0.0, v + a * (min(t, t_v + t_a) - t_v))


def acc_command(gap: float, v_ego: float, params: SimParams) -> float:
    lo, hi = params.accel_bounds
    return float(np.clip(params.acc_gain * (gap - params.time_gap * v_ego), lo, hi))


def pure_pursuit_steer(state: VehicleState, lanes, params: SimParams = SimParams()) -> float:
    """Steering angle towards the centerline point one lookahead distance ahead.

    ``lanes`` may be a LaneGeometry or an already built Centerline.
    """
    line = lanes if isinstance(lanes, Centerline) else Centerline(lanes)
    lookahead = max(params.lookahead_min, params.lookahead_factor * state.speed)
    target = line.lookahead_point(np.array([state.x, state.y]), lookahead)
    alpha = math.atan2(target[1] - state.y, target[0] - state.x) - state.heading
    return math.atan(2.0 * params.wheelbase * math.sin(alpha) / lookahead)


def simulate(scenario: ConcreteScenario, lanes: LaneGeometry, rng=None,
             params: SimParams = SimParams()) -> SceneRecord:
    """Integrate both vehicles with explicit Euler and package the result with its metrics.

    ``rng`` supplies the dynamics noise (defaults to the scenario's own substream).
    Heading noise only touches the logged headings.
    """
    if rng is None:
        rng = substream(scenario.seed, "dynamics")
    n = params.num_steps + 1
    dt = params.dt
    ob = params.orientation_noise_bound
    ego_hnoise = np.asarray(rng.uniform(-ob, ob, size=n), dtype=float)
    co_hnoise = np.asarray(rng.uniform(-ob, ob, size=n), dtype=float)
    cb = params.co_speed_noise_bound
    co_vnoise = np.asarray(rng.uniform(-cb, cb, size=n), dtype=float)

    line = Centerline(lanes)
    has_co = scenario.kind.has_co

    s0 = line.arclength_at_x(params.ego_x0)
    ex, ey = (float(c) for c in line.point_at(s0))
    eth = line.heading_at(s0)
    ev = float(scenario.v_ego)
    ego = np.empty((n, 5))
    co = np.empty((n, 5)) if has_co else None
    if has_co:
        cs = line.arclength_at_x(scenario.x_co)

    for k in range(n):
        t = k * dt
        ego[k] = (t, ex, ey, eth + ego_hnoise[k], ev)
        if has_co:
            cv = max(0.0, co_speed_profile(t, scenario) + co_vnoise[k])
            cx, cy = line.point_at(cs)
            co[k] = (t, cx, cy, line.heading_at(cs) + co_hnoise[k], cv)
        if k == n - 1:
            break
        accel = acc_command(math.hypot(cx - ex, cy - ey), ev, params) if has_co else 0.0
        delta = pure_pursuit_steer(VehicleState(t, ex, ey, eth, ev), line, params)
        ex += ev * math.cos(eth) * dt
        ey += ev * math.sin(eth) * dt
        eth += ev * math.tan(delta) / params.wheelbase * dt
        ev = max(0.0, ev + accel * dt)
        if has_co:
            cs += cv * dt

    ego_traj = Trajectory(ego)
    co_traj = Trajectory(co) if has_co else None
    return SceneRecord(
        scenario=scenario,
        lanes=lanes,
        ego=ego_traj,
        co=co_traj,
        metrics=evaluation_metrics(ego_traj, co_traj),
    )
