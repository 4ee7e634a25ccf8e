"""Multimodal VAE toolkit: command-line entry point.

Commands:
    gen-data   generate a dataset for one grid cell
    train      train an MVAE / MMVAE / MoPoE model on a dataset
    eval       evaluate task success (and optionally a threshold curve)
    report     collect evaluation runs into grid CSV reports

Usage:
    python cmd/mmvae/main.py gen-data --config configs/cells/fixed_reach.json --n 500 --seed 1 --out data/fixed_reach
    python cmd/mmvae/main.py train --model mvae --recon sigma --data data/fixed_reach --epochs 200 --seed 1 --out runs/mvae
    python cmd/mmvae/main.py eval --ckpt runs/mvae/checkpoint.ckpt --config configs/cells/fixed_reach.json --trials 100 --seed 1 --out runs/mvae/eval
    python cmd/mmvae/main.py report --runs "runs/*/eval/accuracy.json" --out reports

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.

Environment variables:
    MMVAE_LOG_LEVEL  default log level (default: INFO)
"""

import argparse
import csv
import glob
import json
import logging
import os
import sys

# Ensure the project root is on sys.path so that "internal" is importable
PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

import yaml

from internal.evalharness.evaluate import (
    ModelPredictor, check_curve_cell, check_thresholds, curve_from_trials, evaluate_success,
    trial_records,
)
from internal.evalharness.report import grid_report, load_runs
from internal.models.errors import ConfigError, MMVAEError
from internal.models.types import ModelConfig
from internal.scenegen.cells import load_cell
from internal.scenegen.dataset import MANIFEST, generate_dataset, load_dataset
from internal.trainer.train import check_compatible, load_model, train

logger = logging.getLogger("mmvae")

RECON_NAMES = {"mse": "mse", "sigma": "sigma_vae"}


def _parse_thresholds(text: str) -> list:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--curve expects comma-separated meters, got '{text}'")
    return check_thresholds(values)


# ── Commands ─────────────────────────────────────────────────────────────────

def cmd_gen_data(args) -> int:
    cell = load_cell(args.config)
    generate_dataset(cell, args.n, args.seed, args.out)
    print(os.path.join(args.out, MANIFEST))
    return 0


def _model_config(args, dataset) -> ModelConfig:
    data = {}
    if args.model_config:
        with open(args.model_config) as f:
            data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ConfigError("model config file must hold a mapping")
    cell = dataset.manifest["config"]
    data.setdefault("image_size", cell["image_size"])
    data.setdefault("t_max", cell["t_max"])
    data.setdefault("l_max", cell["l_max"])
    data["model_kind"] = args.model
    data["recon_image"] = RECON_NAMES[args.recon]
    data["recon_trajectory"] = RECON_NAMES[args.recon]
    return ModelConfig.from_dict(data).check()


def cmd_train(args) -> int:
    dataset = load_dataset(args.data)
    config = _model_config(args, dataset)
    try:
        check_compatible(config, dataset)
    except ConfigError as e:
        logger.error("Dataset %s does not fit the model: %s", args.data, e)
        return 1
    result = train(
        config, dataset, args.seed, args.out,
        epochs=args.epochs, batch_size=args.batch_size, step_size=args.step_size, resume=args.resume,
    )
    if result.history:
        print(json.dumps(result.history[-1], sort_keys=True))
    print(result.checkpoint_path)
    return 0


def _recon_label(config: ModelConfig) -> str:
    if config.recon_image == config.recon_trajectory:
        return config.recon_trajectory
    return f"{config.recon_image}+{config.recon_trajectory}"


def cmd_eval(args) -> int:
    thresholds = _parse_thresholds(args.curve) if args.curve else None
    cell = load_cell(args.config)
    if thresholds:
        check_curve_cell(cell)
    model, state = load_model(args.ckpt)
    c = model.config
    if args.fusion:
        c.inference_fusion = args.fusion
        c.check()
    mismatches = []
    if cell.image_size != c.image_size:
        mismatches.append(f"cell images are {cell.image_size}px, model expects {c.image_size}px")
    if cell.l_max > c.l_max:
        mismatches.append(f"cell l_max {cell.l_max} exceeds model l_max {c.l_max}")
    if mismatches:
        logger.error("Checkpoint %s does not fit %s: %s", args.ckpt, cell.name, "; ".join(mismatches))
        return 1

    result = evaluate_success(ModelPredictor(model), cell, args.trials, args.seed)
    os.makedirs(args.out, exist_ok=True)
    summary = {
        "model": c.model_kind,
        "recon": _recon_label(c),
        "cell": cell.name,
        "accuracy": result.accuracy,
        "n": result.n_trials,
        "seed": args.seed,
        "objective_kind": c.objective_kind,
        "inference_fusion": c.inference_fusion,
        "epoch": state["epoch"],
    }
    with open(os.path.join(args.out, "diagnostics.jsonl"), "w") as f:
        for record in trial_records(result):
            f.write(json.dumps(record, sort_keys=True) + "\n")
    if thresholds:
        curve = curve_from_trials(result.trials, thresholds)
        summary["curve"] = [list(point) for point in curve]
        with open(os.path.join(args.out, "curve.csv"), "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(("threshold", "accuracy"))
            writer.writerows([(repr(t), repr(a)) for t, a in curve])
    with open(os.path.join(args.out, "accuracy.json"), "w") as f:
        json.dump(summary, f, indent=2, sort_keys=True)
        f.write("\n")
    print(json.dumps({"cell": cell.name, "accuracy": result.accuracy}, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    paths = sorted(glob.glob(args.runs, recursive=True))
    if not paths:
        logger.error("No run files match %s", args.runs)
        return 1
    runs = load_runs(paths)
    if not runs:
        logger.error("None of the %d matching run files is valid", len(paths))
        return 1
    written = grid_report(runs, args.out)
    print(written["grid"])
    return 0


# ── Parser ───────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    defaults = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="mmvae", description=__doc__.splitlines()[0], formatter_class=defaults)
    parser.add_argument(
        "--log-level", default=os.environ.get("MMVAE_LOG_LEVEL", "INFO").upper(),
        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Log level",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate a dataset for one grid cell", formatter_class=defaults)
    p.add_argument("--config", required=True, help="Cell preset file (JSON/YAML)")
    p.add_argument("--n", type=int, required=True, help="Number of episodes")
    p.add_argument("--seed", type=int, required=True, help="Generation seed")
    p.add_argument("--out", required=True, help="Output dataset directory")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="Train a model", formatter_class=defaults)
    p.add_argument("--model", required=True, choices=["mvae", "mmvae", "mopoe"], help="Model kind")
    p.add_argument("--recon", required=True, choices=sorted(RECON_NAMES), help="Reconstruction loss")
    p.add_argument("--data", required=True, help="Dataset directory")
    p.add_argument("--epochs", type=int, default=200, help="Epochs to run")
    p.add_argument("--seed", type=int, required=True, help="Training seed")
    p.add_argument("--out", required=True, help="Output run directory")
    p.add_argument("--batch-size", type=int, default=None, help="Minibatch size (model config default when unset)")
    p.add_argument("--step-size", type=float, default=None, help="Adam step size (model config default when unset)")
    p.add_argument("--model-config", default=None, help="YAML/JSON ModelConfig overrides")
    p.add_argument("--resume", default=None, help="Checkpoint to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Evaluate task success", formatter_class=defaults)
    p.add_argument("--ckpt", required=True, help="Checkpoint file")
    p.add_argument("--config", required=True, help="Cell preset file for the test scenes")
    p.add_argument("--trials", type=int, default=100, help="Number of test scenes")
    p.add_argument("--seed", type=int, required=True, help="Evaluation seed")
    p.add_argument("--curve", default=None, help="Comma-separated distance thresholds in meters, ascending")
    p.add_argument("--fusion", default=None, choices=["poe", "component_average"], help="Override inference fusion")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="Build grid reports from evaluation runs", formatter_class=defaults)
    p.add_argument("--runs", required=True, help="Glob matching accuracy.json files")
    p.add_argument("--out", required=True, help="Output directory")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level, logging.INFO),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("%s", e)
        return 2
    except (MMVAEError, OSError) as e:
        logger.error("%s", e)
        return 1


if __name__ == "__main__":
    sys.exit(main())
