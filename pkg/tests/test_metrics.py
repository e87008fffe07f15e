import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scenvec.metrics import ErrorReport, ade, evaluation_metrics, mae, max_lateral_position, min_acceleration, min_distance
from scenvec.scenario_model import ScenarioKind, Trajectory

T = 0.2 * np.arange(26)


def traj(x, y=None, speed=None):
    x = np.asarray(x, dtype=float)
    n = len(x)
    y = np.zeros(n) if y is None else np.asarray(y, dtype=float)
    speed = np.zeros(n) if speed is None else np.asarray(speed, dtype=float)
    return Trajectory(np.column_stack([0.2 * np.arange(n), x, y, np.zeros(n), speed]))


def test_ade_identity_and_offset(small_sources):
    truth = small_sources[ScenarioKind.LK][0].ego
    assert ade(truth, truth) == 0.0
    moved = Trajectory(truth.data + np.array([0.0, 0.3, 0.4, 0.0, 0.0]))
    assert ade(moved, truth) == pytest.approx(0.5, abs=1e-12)


def test_ade_straight_vs_curved(small_sources):
    truth = small_sources[ScenarioKind.LK][3].ego
    straight = traj(truth.x[0] + 2.0 * np.arange(26), np.full(26, truth.y[0]))
    total = 0.0
    for k in range(2, 26):
        total += ((straight.x[k] - truth.x[k]) ** 2 + (straight.y[k] - truth.y[k]) ** 2) ** 0.5
    assert ade(straight, truth) == pytest.approx(total / 24, rel=1e-12)


def test_ade_skip_configurable():
    a, b = traj(np.zeros(26)), traj(np.ones(26))
    assert ade(a, b, skip=0) == 1.0
    with pytest.raises(ValueError):
        ade(a, traj(np.zeros(25)))


def test_min_acceleration_examples():
    assert min_acceleration(traj(np.zeros(26), speed=np.full(26, 10.0))) == 0.0
    assert min_acceleration(traj(np.zeros(3), speed=[10.0, 9.0, 8.0])) == pytest.approx(-5.0)
    rising = traj(np.zeros(4), speed=[1.0, 2.0, 2.5, 4.0])
    assert min_acceleration(rising) == pytest.approx(2.5)


def test_max_lateral_examples(small_sources):
    assert max_lateral_position(traj(np.zeros(26))) == 0.0
    assert max_lateral_position(traj(np.zeros(3), y=[0.0, 1.0, -3.0])) == 3.0
    r = small_sources[ScenarioKind.LK][5]
    assert r.metrics.p_lat_max == max(abs(float(y)) for y in r.ego.y)


def test_min_distance_examples():
    ego = traj(-50 + 2.0 * np.arange(26))
    assert min_distance(ego, traj(ego.x + 20.0)) == pytest.approx(20.0)
    assert min_distance(ego, ego) == 0.0
    stopped = traj(np.full(26, -20.5), y=np.full(26, 1.0))
    scan = min(((ego.x[k] + 20.5) ** 2 + 1.0) ** 0.5 for k in range(26))
    assert min_distance(ego, stopped) == scan


def test_min_distance_needs_shared_timestamps():
    with pytest.raises(ValueError):
        min_distance(traj(np.zeros(26)), traj(np.zeros(25)))


def test_lk_metrics_skip_distance(small_sources):
    r = small_sources[ScenarioKind.LK][0]
    assert evaluation_metrics(r.ego, None).d_min is None


def test_mae_examples():
    assert mae([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mae([1.0, 2.0], [2.0, 4.0]) == 1.5
    with pytest.raises(ValueError):
        mae([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        ErrorReport(ade=-1.0)


coords = arrays(np.float64, (26, 2), elements=st.floats(-100, 100))
offset = st.tuples(st.floats(-50, 50), st.floats(-50, 50))


def as_traj(xy):
    return traj(xy[:, 0], xy[:, 1])


@given(coords, coords, offset)
def test_ade_translation_invariant(p, q, c):
    c = np.array(c)
    assert ade(as_traj(p + c), as_traj(q + c)) == pytest.approx(ade(as_traj(p), as_traj(q)), abs=1e-9)


@given(coords, coords)
def test_symmetry_and_scan_optimality(p, q):
    a, b = as_traj(p), as_traj(q)
    assert ade(a, b) == ade(b, a)
    assert min_distance(a, b) == min_distance(b, a)
    per_step = np.hypot(*(p - q).T)
    assert np.all(min_distance(a, b) <= per_step)
