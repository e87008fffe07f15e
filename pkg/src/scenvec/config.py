"""JSON experiment configuration with strict key checking.

Every section is optional; omitted values take the defaults below.

.. code-block:: json

    {
      "generation": {"counts": {"ACC": 4000, "LK": 4000, "ACC_AND_LK": 4000},
                     "master_seeds": {"ACC": 1, "LK": 2, "ACC_AND_LK": 3},
                     "workers": 1},
      "sim": {"acc_gain": 0.3},
      "model": {"hidden_dim": 32, "epochs": 100},
      "mixes": [[2000, 0, 0], [0, 2000, 0]],
      "baseline": {"num_trees": 100, "min_samples_leaf": 2},
      "test_size": 1000,
      "out_dir": "runs/default"
    }

``mixes`` entries are ``[N_ACC, N_LK, N_ACC&LK]`` or objects with
``n_acc``/``n_lk``/``n_acc_lk``/``seeds``; the default is the ten standard training mixes.
Default counts cover the largest per-kind training request (3000) plus the
test pool.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from scenvec.dataset_io import DEFAULT_TEST_SIZE, DEFAULT_MIXES, MixSpec
from scenvec.metamodel import TreeParams
from scenvec.predictor import ModelConfig
from scenvec.scenario_model import ScenarioKind
from scenvec.simulator import SimParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class GenerationConfig:
    counts: dict = field(default_factory=lambda: {k.value: 4000 for k in ScenarioKind})
    master_seeds: dict = field(default_factory=lambda: {k.value: i + 1 for i, k in enumerate(ScenarioKind)})
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    sim: SimParams = field(default_factory=SimParams)
    model: ModelConfig = field(default_factory=lambda: ModelConfig(epochs=100))
    mixes: tuple = tuple(DEFAULT_MIXES)
    baseline: TreeParams = field(default_factory=TreeParams)
    test_size: int = DEFAULT_TEST_SIZE
    out_dir: str = "runs/default"

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Apply a ``--seed`` override to the generation seeds, the model and the mixes."""
        gen = replace(self.generation, master_seeds={k.value: seed for k in ScenarioKind})
        mixes = tuple(replace(m, seeds={k.value: seed for k in ScenarioKind}) for m in self.mixes)
        return replace(self, generation=gen, model=replace(self.model, init_seed=seed),
                       baseline=replace(self.baseline, seed=seed), mixes=mixes)


def _build(cls, data: Any, section: str):
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {unknown}")
    kwargs = dict(data)
    if cls is SimParams and "accel_bounds" in kwargs:
        kwargs["accel_bounds"] = tuple(kwargs["accel_bounds"])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{section}': {exc}") from exc


def _kind_map(data: Any, section: str, base: dict) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"'{section}' must map scenario kinds to integers")
    valid = {k.value for k in ScenarioKind}
    unknown = sorted(set(data) - valid)
    if unknown:
        raise ConfigError(f"unknown scenario kinds in '{section}': {unknown}")
    out = dict(base)
    for key, value in data.items():
        if not isinstance(value, int) or value < 0:
            raise ConfigError(f"'{section}.{key}' must be a non-negative integer")
        out[key] = value
    return out


def _mix(entry: Any) -> MixSpec:
    try:
        if isinstance(entry, (list, tuple)):
            return MixSpec(*map(int, entry))
        if isinstance(entry, dict):
            return _build(MixSpec, entry, "mixes[]")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid mix {entry!r}: {exc}") from exc
    raise ConfigError(f"invalid mix {entry!r}")


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(data) - {f.name for f in fields(ExperimentConfig)})
    if unknown:
        raise ConfigError(f"unknown top-level keys: {unknown}")
    cfg = ExperimentConfig()
    if "generation" in data:
        gen = data["generation"]
        if not isinstance(gen, dict):
            raise ConfigError("section 'generation' must be an object")
        extra = sorted(set(gen) - {"counts", "master_seeds", "workers"})
        if extra:
            raise ConfigError(f"unknown keys in 'generation': {extra}")
        defaults = GenerationConfig()
        cfg = replace(cfg, generation=GenerationConfig(
            counts=_kind_map(gen.get("counts", {}), "generation.counts", defaults.counts),
            master_seeds=_kind_map(gen.get("master_seeds", {}), "generation.master_seeds", defaults.master_seeds),
            workers=int(gen.get("workers", defaults.workers)),
        ))
    if "sim" in data:
        cfg = replace(cfg, sim=_build(SimParams, data["sim"], "sim"))
    if "model" in data:
        model = {"epochs": ExperimentConfig().model.epochs, **data["model"]} if isinstance(data["model"], dict) else data["model"]
        cfg = replace(cfg, model=_build(ModelConfig, model, "model"))
    if "baseline" in data:
        cfg = replace(cfg, baseline=_build(TreeParams, data["baseline"], "baseline"))
    if "mixes" in data:
        if not isinstance(data["mixes"], list) or not data["mixes"]:
            raise ConfigError("'mixes' must be a non-empty list")
        cfg = replace(cfg, mixes=tuple(_mix(m) for m in data["mixes"]))
    if "test_size" in data:
        if not isinstance(data["test_size"], int) or data["test_size"] < 1:
            raise ConfigError("'test_size' must be a positive integer")
        cfg = replace(cfg, test_size=data["test_size"])
    if "out_dir" in data:
        cfg = replace(cfg, out_dir=str(data["out_dir"]))
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_dict(data)
