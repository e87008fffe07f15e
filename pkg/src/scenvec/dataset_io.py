"""JSON Lines persistence of scene records, deterministic splits and training mixes of scenario kinds."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from scenvec.scenario_model import (
    ConcreteScenario,
    EvaluationMetrics,
    LaneGeometry,
    ScenarioKind,
    SceneRecord,
    Trajectory,
    validate,
)

SCHEMA_VERSION = 1
DEFAULT_TEST_SIZE = 1000


class DatasetError(Exception):
    """Raised for unreadable, mismatched or insufficient dataset files."""


def record_to_dict(record: SceneRecord) -> dict:
    s = record.scenario
    scenario = {}
    for f in fields(ConcreteScenario):
        value = getattr(s, f.name)
        if f.name == "kind":
            value = value.value
        elif isinstance(value, float):
            value = float(value)
        scenario[f.name] = value
    return {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "lanes": {
            "sample_x": record.lanes.sample_x.tolist(),
            "center_y": record.lanes.center_y.tolist(),
            "half_width": float(record.lanes.half_width),
        },
        "ego": record.ego.data.tolist(),
        "co": None if record.co is None else record.co.data.tolist(),
        "metrics": {
            "a_min": record.metrics.a_min,
            "p_lat_max": record.metrics.p_lat_max,
            "d_min": record.metrics.d_min,
        },
    }


def record_from_dict(obj: dict) -> SceneRecord:
    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatasetError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    sc = dict(obj["scenario"])
    sc["kind"] = ScenarioKind(sc["kind"])
    lanes = obj["lanes"]
    return SceneRecord(
        scenario=ConcreteScenario(**sc),
        lanes=LaneGeometry(
            sample_x=np.array(lanes["sample_x"], dtype=float),
            center_y=np.array(lanes["center_y"], dtype=float),
            half_width=float(lanes["half_width"]),
        ),
        ego=Trajectory(np.array(obj["ego"], dtype=float)),
        co=None if obj["co"] is None else Trajectory(np.array(obj["co"], dtype=float)),
        metrics=EvaluationMetrics(**obj["metrics"]),
    )


def write_scenes(records: Sequence[SceneRecord], path) -> int:
    """Write one JSON object per line; floats use the shortest exact round-trip repr."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False, allow_nan=False))
            fh.write("\n")
    return len(records)


def read_scenes(path, check: bool = True) -> list[SceneRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path}:{lineno}: malformed line ({exc.msg})") from exc
            try:
                record = record_from_dict(obj)
            except DatasetError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from exc
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path}:{lineno}: malformed record ({exc})") from exc
            if check:
                problems = validate(record)
                if problems:
                    raise DatasetError(f"{path}:{lineno}: invalid record: {'; '.join(problems)}")
            records.append(record)
    return records


def split_train_val(pool: Sequence, ratio: float = 0.9, seed: int = 0):
    if len(pool) < 10:
        raise ValueError(f"pool of {len(pool)} is too small to split (need >= 10)")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5917])))
    order = rng.permutation(len(pool))
    n_train = int(np.floor(ratio * len(pool)))
    return [pool[i] for i in order[:n_train]], [pool[i] for i in order[n_train:]]


@dataclass(frozen=True)
class MixSpec:
    n_acc: int
    n_lk: int
    n_acc_lk: int
    seeds: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        counts = (self.n_acc, self.n_lk, self.n_acc_lk)
        if min(counts) < 0:
            raise ValueError("mix counts must be non-negative")
        if max(counts) == 0:
            raise ValueError("mix requests no samples")

    def count(self, kind: ScenarioKind) -> int:
        return {ScenarioKind.ACC: self.n_acc, ScenarioKind.LK: self.n_lk,
                ScenarioKind.ACC_AND_LK: self.n_acc_lk}[kind]

    @property
    def label(self) -> str:
        return f"{self.n_acc}/{self.n_lk}/{self.n_acc_lk}"


# The ten standard training mixes as (N_ACC, N_LK, N_ACC&LK).
DEFAULT_MIXES = [
    MixSpec(2000, 0, 0),
    MixSpec(0, 2000, 0),
    MixSpec(0, 0, 2000),
    MixSpec(2000, 2000, 0),
    MixSpec(0, 2000, 2000),
    MixSpec(0, 3000, 3000),
    MixSpec(2000, 0, 2000),
    MixSpec(2000, 2000, 2000),
    MixSpec(2000, 2000, 200),
    MixSpec(0, 0, 200),
]


def assemble_mix(spec: MixSpec, sources: Mapping[ScenarioKind, Sequence[SceneRecord]],
                 test_size: int = DEFAULT_TEST_SIZE):
    """Return ``(training_pool, test_pools)``.

    The last ``test_size`` records of each source form its fixed test pool;
    training records come from a seeded shuffle of the remainder. Kinds absent
    from ``sources`` are skipped when the mix requests none of them.
    """
    pool: list[SceneRecord] = []
    tests: dict[ScenarioKind, list[SceneRecord]] = {}
    for kind in ScenarioKind:
        need = spec.count(kind)
        if kind not in sources and need == 0:
            continue
        src = list(sources.get(kind, ()))
        if len(src) < need + test_size:
            raise DatasetError(
                f"{kind.value}: {len(src)} records available, {need} training + {test_size} test requested"
            )
        head, test = src[: len(src) - test_size], src[len(src) - test_size:]
        tests[kind] = test
        if need:
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([spec.seeds.get(kind.value, 0), kind.code])))
            pick = np.sort(rng.choice(len(head), size=need, replace=False))
            pool.extend(head[i] for i in pick)
    return pool, tests
