"""Median ADE on the ACC&LK test pool for a small-data mix with and without ACC/LK support, over model seeds.

    python3 scripts/mixing_seeds.py --out runs/default --seeds 0 1 2

Expects datasets from ``scenvec generate`` in OUT/data.
"""
import argparse
from dataclasses import replace

import numpy as np

from scenvec import experiment
from scenvec.config import ExperimentConfig
from scenvec.dataset_io import MixSpec
from scenvec.scenario_model import ScenarioKind


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="runs/default")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--test-size", type=int, default=1000)
    args = parser.parse_args()

    cfg = ExperimentConfig()
    model_cfg = cfg.model if args.epochs is None else replace(cfg.model, epochs=args.epochs)
    sources = experiment.load_sources(args.out)
    for mix in ((2000, 2000, 200), (0, 0, 200)):
        values = []
        for seed in args.seeds:
            spec = MixSpec(*mix, seeds={k.value: seed for k in ScenarioKind})
            row, _ = experiment.train_mix(spec, sources, replace(model_cfg, init_seed=seed), args.test_size)
            values.append(row["ADE_ACC&LK [m]"])
            print(f"mix {spec.label} seed {seed}: ADE_ACC&LK {values[-1]:.3f} m")
        print(f"mix {spec.label}: median {np.median(values):.3f} m")


if __name__ == "__main__":
    main()
