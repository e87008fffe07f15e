"""End-to-end pipeline steps shared by the CLI and the experiment scripts."""
from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from scenvec import metamodel, predictor
from scenvec.dataset_io import DatasetError, MixSpec, assemble_mix, read_scenes
from scenvec.metamodel import OUTPUT_MANIFEST, TabularDataset, TreeParams
from scenvec.metrics import METRIC_UNITS, ade, evaluation_metrics, mae
from scenvec.predictor import ModelConfig, PredictorModel
from scenvec.report import ADE_COLUMNS, COUNT_COLUMNS, KIND_LABEL, mae_column, trajectory_svg
from scenvec.sampler import SamplerConfig, sample_concrete, sample_lane_geometry
from scenvec.scenario_model import ScenarioKind, SceneRecord
from scenvec.simulator import SimParams, simulate
from scenvec.vectorizer import reconstruct_trajectory, vectorize

log = logging.getLogger(__name__)


def generate_one(config: SamplerConfig, index: int, sim: SimParams = SimParams()) -> SceneRecord:
    scenario = sample_concrete(config, index)
    return simulate(scenario, sample_lane_geometry(scenario), params=sim)


def generate_records(kind: ScenarioKind, master_seed: int, count: int, sim: SimParams = SimParams(),
                     workers: int = 1) -> list[SceneRecord]:
    if count == 0:
        return []
    config = SamplerConfig(kind, master_seed, count)
    if workers <= 1:
        return [generate_one(config, i, sim) for i in range(count)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: generate_one(config, i, sim), range(count)))


def data_path(out_dir, kind: ScenarioKind) -> Path:
    return Path(out_dir) / "data" / f"{kind.value}.jsonl"


def load_sources(out_dir, kinds: Sequence[ScenarioKind] = tuple(ScenarioKind)) -> dict[ScenarioKind, list[SceneRecord]]:
    sources = {}
    for kind in kinds:
        path = data_path(out_dir, kind)
        if not path.exists():
            raise DatasetError(f"missing dataset {path}; run 'generate' first")
        sources[kind] = read_scenes(path)
    return sources


def predicted_metrics(scenes, records: Sequence[SceneRecord], predictions: np.ndarray):
    """Reconstruct each predicted Ego trajectory and derive metrics with the true Co trajectory."""
    trajs = [reconstruct_trajectory(s, p) for s, p in zip(scenes, predictions)]
    metrics = [evaluation_metrics(t, r.co) for t, r in zip(trajs, records)]
    return trajs, metrics


def evaluate_model(model: PredictorModel, tests: Mapping[ScenarioKind, Sequence[SceneRecord]]) -> dict[str, float]:
    """ADE per test pool plus MAE of the metrics derived from the predicted trajectories."""
    out: dict[str, float] = {}
    for kind, records in tests.items():
        scenes = [vectorize(r) for r in records]
        preds = predictor.predict(scenes, model)
        trajs, metrics = predicted_metrics(scenes, records, preds)
        out[f"ADE_{KIND_LABEL[kind]} [m]"] = float(np.mean([ade(t, r.ego) for t, r in zip(trajs, records)]))
        for name in OUTPUT_MANIFEST[kind]:
            out[mae_column(kind, name)] = mae([getattr(m, name) for m in metrics],
                                              [getattr(r.metrics, name) for r in records])
    return out


def train_mix(mix: MixSpec, sources: Mapping[ScenarioKind, Sequence[SceneRecord]], model_config: ModelConfig,
              test_size: int, row_label: str = "", out_dir: Optional[Path] = None) -> tuple[dict, PredictorModel]:
    start = time.perf_counter()
    pool, tests = assemble_mix(mix, sources, test_size)
    scenes = [vectorize(r) for r in pool]
    result = predictor.train(scenes, model_config)
    n_train = int(np.floor(0.9 * len(scenes))) if len(scenes) >= 10 else len(scenes)
    row: dict[str, object] = {"row": row_label}
    row.update(zip(COUNT_COLUMNS, (mix.n_acc, mix.n_lk, mix.n_acc_lk)))
    metrics = evaluate_model(result.model, tests)
    row.update({c: metrics.get(c, float("nan")) for c in ADE_COLUMNS})
    row.update({k: v for k, v in metrics.items() if k not in ADE_COLUMNS})
    row.update({
        "init_seed": model_config.init_seed,
        "precision": model_config.precision,
        "epochs": model_config.epochs,
        "best_epoch": result.best_epoch,
        "train_size": n_train,
        "val_size": len(scenes) - n_train,
        "test_size": test_size,
        "wall_time [s]": round(time.perf_counter() - start, 1),
    })
    if out_dir is not None:
        _plot_examples(result.model, tests, Path(out_dir) / "plots", row_label, model_config.init_seed)
    return row, result.model


def _plot_examples(model: PredictorModel, tests, plot_dir: Path, label: str, seed: int) -> None:
    for kind, records in tests.items():
        if not records:
            continue
        record = records[0]
        scene = vectorize(record)
        traj = reconstruct_trajectory(scene, predictor.forward(scene, model))
        lanes = [np.column_stack([record.lanes.sample_x, y]) for y in (record.lanes.left_y, record.lanes.right_y)]
        series = {"Ego (truth)": record.ego.positions, "Ego (predicted)": traj.positions}
        if record.co is not None:
            series["Co"] = record.co.positions
        trajectory_svg(plot_dir / f"mix{label}_seed{seed}_{kind.value}.svg", lanes, series,
                       title=f"mix {label}, {KIND_LABEL[kind]} test scene 0")


def baseline_rows(sources: Mapping[ScenarioKind, Sequence[SceneRecord]], params: TreeParams, test_size: int,
                  train_size: int = 2000, predictor_mae: Optional[Mapping[str, float]] = None) -> list[dict]:
    """Fit the tree ensemble per scenario and compare its MAE with a constant-mean predictor and the network."""
    rows = []
    predictor_mae = predictor_mae or {}
    for kind in ScenarioKind:
        if kind not in sources:
            continue
        counts = {ScenarioKind.ACC: (train_size, 0, 0), ScenarioKind.LK: (0, train_size, 0),
                  ScenarioKind.ACC_AND_LK: (0, 0, train_size)}[kind]
        pool, tests = assemble_mix(MixSpec(*counts), {kind: sources[kind]}, test_size)
        train = TabularDataset.from_records(pool, kind)
        test = TabularDataset.from_records(tests[kind], kind)
        ensemble = metamodel.fit(train, params)
        pred = metamodel.predict(ensemble, test.inputs)
        for j, name in enumerate(test.output_names):
            truth = test.outputs[:, j]
            rows.append({
                "scenario": KIND_LABEL[kind],
                "metric": name,
                "unit": METRIC_UNITS[name],
                "MAE_ET": mae(pred[:, j], truth),
                "MAE_mean": mae(np.full_like(truth, train.outputs[:, j].mean()), truth),
                "MAE_predictor": predictor_mae.get(mae_column(kind, name), float("nan")),
            })
    return rows


def single_kind_mix_index(mixes: Sequence[MixSpec], kind: ScenarioKind, count: int = 2000) -> Optional[int]:
    for i, m in enumerate(mixes):
        counts = {ScenarioKind.ACC: (count, 0, 0), ScenarioKind.LK: (0, count, 0),
                  ScenarioKind.ACC_AND_LK: (0, 0, count)}[kind]
        if (m.n_acc, m.n_lk, m.n_acc_lk) == counts:
            return i
    return None


def model_config_for(config: ModelConfig, seed: Optional[int]) -> ModelConfig:
    return config if seed is None else replace(config, init_seed=seed)
