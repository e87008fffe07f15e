import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenvec.sampler import MidpointStream, SamplerConfig, sample_concrete, sample_lane_geometry
from scenvec.scenario_model import ConcreteScenario, LaneGeometry, ScenarioKind, VehicleState, lane_sample_x
from scenvec.simulator import SimParams, acc_command, co_speed_profile, pure_pursuit_steer, simulate

from conftest import quiet_record

PARAMS = SimParams()
STRAIGHT = LaneGeometry(lane_sample_x(), np.zeros(25), 1.75)


def co_scenario(v_co, t_v, a, t_a):
    return ConcreteScenario(kind=ScenarioKind.ACC, v_ego=10.0, x_co=-30.0, v_co=v_co, t_v_co=t_v, a_co=a, t_a_co=t_a)


@pytest.mark.parametrize("args,t,expected", [
    ((12.0, 1.0, -4.0, 2.0), 0.5, 12.0),
    ((12.0, 1.0, -4.0, 2.0), 2.0, 8.0),
    ((2.0, 0.0, -8.0, 3.0), 1.0, 0.0),
])
def test_co_speed_profile(args, t, expected):
    assert co_speed_profile(t, co_scenario(*args)) == expected


def test_co_speed_holds_after_window():
    s = co_scenario(12.0, 1.0, -1.0, 2.0)
    assert co_speed_profile(4.5, s) == co_speed_profile(3.0, s) == 10.0


@pytest.mark.parametrize("gap,v,expected", [(20.0, 10.0, 0.0), (10.0, 10.0, -3.0), (40.0, 10.0, 2.0),
                                            (0.0, 16.0, -8.0)])
def test_acc_command(gap, v, expected):
    assert acc_command(gap, v, PARAMS) == pytest.approx(expected, abs=1e-12)


def test_pure_pursuit_aligned_on_line():
    assert pure_pursuit_steer(VehicleState(0, 0.0, 0.0, 0.0, 8.0), STRAIGHT, PARAMS) == 0.0


def test_pure_pursuit_hand_geometry():
    # lookahead circle of radius 5 around (0, 1) meets y=0 at x=sqrt(24)
    alpha = math.atan2(-1.0, math.sqrt(24.0))
    delta = math.atan(2 * 2.8 * math.sin(alpha) / 5.0)
    left = pure_pursuit_steer(VehicleState(0, 0.0, 1.0, 0.0, 8.0), STRAIGHT, PARAMS)
    right = pure_pursuit_steer(VehicleState(0, 0.0, -1.0, 0.0, 8.0), STRAIGHT, PARAMS)
    assert left == pytest.approx(delta, abs=1e-12)
    assert right == -left


def test_pure_pursuit_clamps_to_road_end():
    alpha = math.atan2(-1.0, 2.0)
    delta = math.atan(2 * 2.8 * math.sin(alpha) / 5.0)
    assert pure_pursuit_steer(VehicleState(0, 53.0, 1.0, 0.0, 8.0), STRAIGHT, PARAMS) == pytest.approx(delta, abs=1e-12)


def test_constant_gap_equilibrium():
    r = quiet_record(v_ego=10.0, x_co=-30.0, v_co=10.0, t_v_co=10.0, a_co=-1.0, t_a_co=1.0)
    assert abs(r.metrics.a_min) <= 1e-9
    assert r.metrics.d_min == pytest.approx(20.0, abs=1e-9)


def test_straight_lane_keeping():
    r = quiet_record(kind=ScenarioKind.LK, v_ego=10.0)
    assert np.max(np.abs(r.ego.y)) == 0.0
    assert r.metrics.p_lat_max <= 1e-9
    assert r.ego.x[-1] == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(np.diff(r.ego.x), 10.0 * 0.2, atol=1e-12)


def scripted_straight_acc(v_ego, x_co, scenario, params=PARAMS):
    """Plain loop over a straight, noise-free road; independent of the simulator's geometry code."""
    dt = params.dt
    ex, ev, cx = params.ego_x0, v_ego, x_co
    ego_x, ego_v, co_x = [], [], []
    for k in range(26):
        t = k * dt
        cv = co_speed_profile(t, scenario)
        ego_x.append(ex)
        ego_v.append(ev)
        co_x.append(cx)
        # Euclidean gap: stays positive once the Ego has driven past a stopped Co
        a = min(max(params.acc_gain * (abs(cx - ex) - params.time_gap * ev), -8.0), 2.0)
        ex += ev * dt
        ev = max(0.0, ev + a * dt)
        cx += cv * dt
    return np.array(ego_x), np.array(ego_v), np.array(co_x)


def test_decelerating_co_against_scripted_integrator():
    fields = dict(v_ego=12.0, x_co=-30.0, v_co=12.0, t_v_co=0.0, a_co=-8.0, t_a_co=3.0)
    r = quiet_record(**fields)
    ex, ev, cx = scripted_straight_acc(12.0, -30.0, ConcreteScenario(kind=ScenarioKind.ACC, **fields))
    np.testing.assert_allclose(r.ego.x, ex, atol=1e-9)
    np.testing.assert_allclose(r.ego.speed, ev, atol=1e-9)
    np.testing.assert_allclose(r.co.x, cx, atol=1e-9)
    expected = np.min(np.diff(ev) / 0.2)
    assert r.metrics.a_min == pytest.approx(expected, abs=1e-9)
    assert -8.0 <= r.metrics.a_min < 0.0


def distance_to_centerline(points, lanes):
    """Distance to the polyline whose first/last segments extend to infinity."""
    pts = np.column_stack([lanes.sample_x, lanes.center_y])
    best = np.full(len(points), np.inf)
    n = len(pts) - 1
    for i in range(n):
        a, b = pts[i], pts[i + 1]
        d = b - a
        u = (points - a) @ d / (d @ d)
        u = np.clip(u, -np.inf if i == 0 else 0.0, np.inf if i == n - 1 else 1.0)
        foot = a + u[:, None] * d
        best = np.minimum(best, np.hypot(*(points - foot).T))
    return best


record_keys = st.tuples(st.sampled_from([ScenarioKind.ACC, ScenarioKind.ACC_AND_LK]),
                        st.integers(0, 2**32), st.integers(0, 99))


@settings(max_examples=25, deadline=None)
@given(record_keys)
def test_generated_record_properties(key):
    kind, seed, index = key
    s = sample_concrete(SamplerConfig(kind, seed, 100), index)
    r = simulate(s, sample_lane_geometry(s))
    assert np.all(r.ego.speed >= 0) and np.all(r.co.speed >= 0)
    assert np.max(distance_to_centerline(r.co.positions, r.lanes)) <= 1e-9
    again = simulate(s, sample_lane_geometry(s))
    assert again.ego == r.ego and again.co == r.co and again.metrics == r.metrics


@settings(max_examples=25, deadline=None)
@given(st.floats(8, 16), st.floats(0, 1), st.floats(-1, 1), st.floats(0, 3))
def test_zero_noise_straight_road_stays_on_axis(v, frac, dv, t_v):
    r = quiet_record(v_ego=v, x_co=-50 + v * (1 + frac), v_co=v + 4 * dv, t_v_co=t_v, a_co=-3.0, t_a_co=2.0)
    assert np.max(np.abs(r.ego.y)) <= 1e-6


def test_heading_noise_only_in_log():
    bound = math.radians(2.9)
    s = sample_concrete(SamplerConfig(ScenarioKind.LK, 5, 10), 2)
    lanes = sample_lane_geometry(s)
    quiet = simulate(s, lanes, rng=MidpointStream())
    noisy = simulate(s, lanes)
    np.testing.assert_array_equal(quiet.ego.positions, noisy.ego.positions)
    diff = noisy.ego.heading - quiet.ego.heading
    assert np.max(np.abs(diff)) <= bound and np.max(np.abs(diff)) > 0


def test_noise_does_not_touch_other_streams():
    s = sample_concrete(SamplerConfig(ScenarioKind.ACC, 5, 10), 3)
    lanes = sample_lane_geometry(s)
    quiet = simulate(s, lanes, rng=MidpointStream())
    noisy = simulate(s, lanes)
    np.testing.assert_array_equal(quiet.ego.t, noisy.ego.t)
    assert not np.array_equal(quiet.ego.heading, noisy.ego.heading)
