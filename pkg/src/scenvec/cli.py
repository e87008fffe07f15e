"""Command line entry point: generate, train, baseline, gradcheck, report.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 check failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from scenvec import experiment, predictor
from scenvec.config import ConfigError, ExperimentConfig, load_config
from scenvec.dataset_io import DatasetError, write_scenes
from scenvec.report import KIND_LABEL, ade_table, mae_table, metadata_table, read_rows, write_row, write_rows
from scenvec.sampler import SamplerConfig
from scenvec.scenario_model import ScenarioKind
from scenvec.vectorizer import vectorize

log = logging.getLogger("scenvec")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CHECK = 0, 1, 2, 3
GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="experiment JSON config")
    p.add_argument("--out", type=Path, help="output directory (overrides config out_dir)")
    p.add_argument("--seed", type=int, help="override every seed in the config")
    p.add_argument("--test-size", type=int, help="records per kind reserved for testing")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scenvec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample, simulate and write JSONL datasets per scenario kind")
    _common(p)
    p.add_argument("--workers", type=int, help="worker threads for simulation")

    p = sub.add_parser("train", help="train the predictor on one scenario mix and write a report row")
    _common(p)
    p.add_argument("--mix", type=int, required=True, help="1-based index into the config's mixes")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("baseline", help="fit the tree ensemble per scenario and write the MAE comparison")
    _common(p)
    p.add_argument("--train-size", type=int, default=2000)

    p = sub.add_parser("gradcheck", help="finite-difference check of the predictor's backward pass")
    _common(p)
    p.add_argument("--hidden-dim", type=int, default=4)
    p.add_argument("--precision", choices=["single", "double"], default="double")
    p.add_argument("--corrupt-gradient", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("report", help="consolidate row files into Markdown tables")
    _common(p)
    p.add_argument("paths", nargs="*", type=Path, help="row CSV files or directories (default: OUT/rows)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.test_size is not None:
        if args.test_size < 1:
            raise UsageError("--test-size must be positive")
        cfg = replace(cfg, test_size=args.test_size)
    if args.out is not None:
        cfg = replace(cfg, out_dir=str(args.out))
    return cfg


def cmd_generate(cfg: ExperimentConfig, workers=None) -> dict[str, int]:
    out = Path(cfg.out_dir)
    (out / "data").mkdir(parents=True, exist_ok=True)
    written = {}
    for kind in ScenarioKind:
        count = cfg.generation.counts[kind.value]
        if count == 0:
            log.warning("count for %s is 0; no file written", kind.value)
            continue
        start = time.perf_counter()
        records = experiment.generate_records(kind, cfg.generation.master_seeds[kind.value], count, cfg.sim,
                                              workers or cfg.generation.workers)
        written[kind.value] = write_scenes(records, experiment.data_path(out, kind))
        print(f"{kind.value}: {written[kind.value]} records in {time.perf_counter() - start:.1f} s")
    return written


def cmd_train(cfg: ExperimentConfig, mix_index: int, epochs=None) -> dict:
    if not 1 <= mix_index <= len(cfg.mixes):
        raise UsageError(f"--mix must be in 1..{len(cfg.mixes)}")
    mix = cfg.mixes[mix_index - 1]
    model_cfg = cfg.model if epochs is None else replace(cfg.model, epochs=epochs)
    out = Path(cfg.out_dir)
    sources = experiment.load_sources(out)
    label = f"{mix_index:02d}"
    row, model = experiment.train_mix(mix, sources, model_cfg, cfg.test_size, label, out)
    stem = f"mix{label}_seed{model_cfg.init_seed}"
    (out / "models").mkdir(parents=True, exist_ok=True)
    model.save(out / "models" / f"{stem}.npz")
    write_row(out / "rows" / f"{stem}.csv", row)
    print(ade_table([{k: str(v) for k, v in row.items()}]))
    return row


def _predictor_mae(out: Path, cfg: ExperimentConfig, train_size: int) -> dict[str, float]:
    found: dict[str, float] = {}
    for kind in ScenarioKind:
        idx = experiment.single_kind_mix_index(cfg.mixes, kind, train_size)
        if idx is None:
            continue
        files = sorted((out / "rows").glob(f"mix{idx + 1:02d}_seed*.csv"))
        if not files:
            continue
        row = read_rows(files[0])[0]
        prefix = f"MAE_{KIND_LABEL[kind]}_"
        found.update({k: float(v) for k, v in row.items() if k.startswith(prefix)})
    return found


def cmd_baseline(cfg: ExperimentConfig, train_size: int = 2000) -> list[dict]:
    out = Path(cfg.out_dir)
    sources = experiment.load_sources(out)
    rows = experiment.baseline_rows(sources, cfg.baseline, cfg.test_size, train_size,
                                    _predictor_mae(out, cfg, train_size))
    write_rows(out / "baseline.csv", rows)
    print(mae_table([{k: str(v) for k, v in r.items()} for r in rows]))
    return rows


def cmd_gradcheck(cfg: ExperimentConfig, hidden_dim: int = 4, precision: str = "double",
                  corrupt: bool = False) -> tuple[bool, float]:
    if precision != "double":
        raise UsageError("gradcheck requires --precision double")
    seed = cfg.model.init_seed
    record = experiment.generate_one(SamplerConfig(ScenarioKind.ACC_AND_LK, seed, 1), 0, cfg.sim)
    scene = vectorize(record)
    model = predictor.live_check_model(scene, hidden_dim, seed, cfg.model.subgraph_layers)
    gradient_fn = None
    if corrupt:
        def gradient_fn(m, batch):
            value, grads = predictor.loss_and_grad(m, batch)
            grads["dec0_W"] = grads["dec0_W"] * 1.01
            return value, grads
    error = predictor.grad_check(model, scene, gradient_fn=gradient_fn)
    ok = error <= GRADCHECK_TOLERANCE
    print(f"gradcheck {'PASS' if ok else 'FAIL'}: max relative error {error:.3e} "
          f"(tolerance {GRADCHECK_TOLERANCE:g}, check model seed {model.config.init_seed})")
    return ok, error


def _collect_row_files(paths) -> list[Path]:
    files = []
    for p in paths:
        if p.is_dir():
            files += sorted(p.glob("*.csv"))
        elif p.exists():
            files.append(p)
        else:
            raise DatasetError(f"no such file or directory: {p}")
    return files


def cmd_report(cfg: ExperimentConfig, paths) -> str:
    out = Path(cfg.out_dir)
    if not paths:
        paths = [p for p in (out / "rows", out / "baseline.csv") if p.exists()]
    files = _collect_row_files(paths)
    train_rows, baseline = [], []
    for f in files:
        rows = read_rows(f)
        if rows and "scenario" in rows[0]:
            baseline += rows
        else:
            train_rows += rows
    if not train_rows and not baseline:
        raise DatasetError("no report rows found")
    parts = ["# Results", ""]
    if train_rows:
        train_rows.sort(key=lambda r: (r.get("row", ""), r.get("init_seed", "")))
        parts += ["## Average displacement errors of predicted Ego trajectories", "", ade_table(train_rows), ""]
        mae_keys = [k for k in train_rows[0] if k.startswith("MAE_")]
        if mae_keys:
            parts += ["## Metric MAE of the predictor per mix", "", metadata_table(train_rows, mae_keys, digits=3), ""]
        meta = ["init_seed", "precision", "epochs", "best_epoch", "train_size", "val_size", "test_size",
                "wall_time [s]"]
        parts += ["## Run metadata", "", metadata_table(train_rows, [k for k in meta if k in train_rows[0]]), ""]
    if baseline:
        parts += ["## Mean absolute errors of predicted evaluation metrics", "", mae_table(baseline), ""]
    text = "\n".join(parts)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(text)
    print(text)
    return text


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "generate":
            if args.workers is not None and args.workers < 1:
                raise UsageError("--workers must be >= 1")
            cmd_generate(cfg, args.workers)
        elif args.command == "train":
            cmd_train(cfg, args.mix, args.epochs)
        elif args.command == "baseline":
            cmd_baseline(cfg, args.train_size)
        elif args.command == "gradcheck":
            ok, _ = cmd_gradcheck(cfg, args.hidden_dim, args.precision, args.corrupt_gradient)
            if not ok:
                return EXIT_CHECK
        elif args.command == "report":
            cmd_report(cfg, args.paths)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, FileNotFoundError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
