"""Seeded uniform sampling of concrete scenarios and noisy lane geometries.

Randomness comes from numpy's Philox4x64 counter-based generator. Every
scenario owns a 64-bit ``seed`` derived from ``(master_seed, kind, index)``
and every purpose (inputs, lanes, dynamics) gets its own substream keyed by
``(seed, tag)``, so changing the number of draws of one purpose never shifts
another scenario or another purpose.

Draw order inside each substream is fixed:

* inputs: active inputs in input-table order (a0..a3, v_ego, x_co, v_co,
  t_v_co, a_co, t_a_co), skipping rows inactive for the kind;
* lanes: width noise, then 25 center offsets;
* dynamics: 26 Ego heading offsets, 26 Co heading offsets, 26 Co speed offsets.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from scenvec.scenario_model import (
    A_CO_RANGE,
    CURVATURE_RANGES,
    LANE_WIDTH,
    NUM_LANE_POINTS,
    T_A_CO_RANGE,
    T_V_CO_RANGE,
    V_EGO_RANGE,
    ConcreteScenario,
    LaneGeometry,
    ScenarioKind,
    lane_sample_x,
    polynomial,
    v_co_range,
    x_co_range,
)

STREAM_TAGS = {"inputs": 1, "lanes": 2, "dynamics": 3}

LANE_CENTER_NOISE = 0.5
LANE_WIDTH_NOISE = 0.3


def scenario_seed(master_seed: int, kind: ScenarioKind, index: int) -> int:
    ss = np.random.SeedSequence([int(master_seed), kind.code, int(index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def substream(seed: int, tag: str) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), STREAM_TAGS[tag]])))


class MidpointStream:
    """Stand-in for a Generator that returns the midpoint of every requested range.

    Symmetric noise ranges therefore yield exactly zero noise.
    """

    def uniform(self, low=0.0, high=1.0, size=None):
        mid = 0.5 * (low + high)
        if size is None:
            return mid
        return np.full(size, mid, dtype=float)


@dataclass(frozen=True)
class SamplerConfig:
    kind: ScenarioKind
    master_seed: int
    count: int

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


def sample_concrete(config: SamplerConfig, index: int, stream=None) -> ConcreteScenario:
    """Draw scenario ``index`` of ``config``; ``stream`` overrides the inputs substream."""
    if not 0 <= index < config.count:
        raise IndexError(f"index {index} outside [0, {config.count})")
    kind = config.kind
    seed = scenario_seed(config.master_seed, kind, index)
    rng = substream(seed, "inputs") if stream is None else stream

    values: dict[str, float] = {}
    if kind.has_curvature:
        for name, lo, hi in CURVATURE_RANGES:
            values[name] = float(rng.uniform(lo, hi))
    v_ego = float(rng.uniform(*V_EGO_RANGE))
    if kind.has_co:
        values["x_co"] = float(rng.uniform(*x_co_range(v_ego)))
        values["v_co"] = float(rng.uniform(*v_co_range(v_ego)))
        values["t_v_co"] = float(rng.uniform(*T_V_CO_RANGE))
        values["a_co"] = float(rng.uniform(*A_CO_RANGE))
        values["t_a_co"] = float(rng.uniform(*T_A_CO_RANGE))
    return ConcreteScenario(
        kind=kind, v_ego=v_ego, seed=seed, master_seed=config.master_seed, index=index, **values
    )


def sample_lane_geometry(scenario: ConcreteScenario, rng=None) -> LaneGeometry:
    if rng is None:
        rng = substream(scenario.seed, "lanes")
    width = LANE_WIDTH + float(rng.uniform(-LANE_WIDTH_NOISE, LANE_WIDTH_NOISE))
    offsets = np.asarray(rng.uniform(-LANE_CENTER_NOISE, LANE_CENTER_NOISE, size=NUM_LANE_POINTS), dtype=float)
    x = lane_sample_x()
    return LaneGeometry(sample_x=x, center_y=polynomial(scenario.coefficients, x) + offsets, half_width=width / 2)
