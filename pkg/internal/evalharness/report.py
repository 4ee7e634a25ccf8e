"""Grid reports over evaluation runs.

Outputs (CSV, header row first):
  grid_report.csv   model, cell, recon, accuracy, n, seed
  improvement.csv   model, cell, mse, sigma_vae, improvement (sigma_vae - mse),
                    closed by a "mean" row averaging the improvements
  curves.csv        run, threshold, accuracy (plot data)
"""

import csv
import json
import logging
import os
from typing import Optional

logger = logging.getLogger(__name__)

GRID_FILE = "grid_report.csv"
IMPROVEMENT_FILE = "improvement.csv"
CURVES_FILE = "curves.csv"
GRID_HEADER = ("model", "cell", "recon", "accuracy", "n", "seed")
IMPROVEMENT_HEADER = ("model", "cell", "mse", "sigma_vae", "improvement")
CURVES_HEADER = ("run", "threshold", "accuracy")

_REQUIRED = ("model", "recon", "cell", "accuracy", "n", "seed")


def _fmt(value) -> str:
    if value is None:
        return ""
    return repr(float(value)) if isinstance(value, float) else str(value)


def validate_run(run) -> list:
    errors = []
    if not isinstance(run, dict):
        return ["run record must be a JSON object"]
    for key in _REQUIRED:
        if key not in run:
            errors.append(f"missing '{key}'")
    acc = run.get("accuracy")
    if not isinstance(acc, (int, float)) or not 0.0 <= acc <= 1.0:
        errors.append("accuracy must be a number in [0, 1]")
    return errors


def load_runs(paths: list) -> list:
    """Parse run files, skipping malformed ones with a warning."""
    runs = []
    for path in sorted(paths):
        try:
            with open(path) as f:
                run = json.load(f)
        except (OSError, ValueError) as e:
            logger.warning("Skipping %s: %s", path, e)
            continue
        errors = validate_run(run)
        if errors:
            logger.warning("Skipping %s: %s", path, "; ".join(errors))
            continue
        run.setdefault("run", os.path.basename(os.path.dirname(os.path.abspath(path))))
        runs.append(run)
    return runs


def grid_rows(runs: list, models: Optional[list] = None, cells: Optional[list] = None) -> list:
    """One row per run, or the full (model, recon) x cell grid when both lists are given.

    models entries are (model, recon) pairs; grid positions without a run
    become rows with empty accuracy, n and seed.
    """
    if models is None or cells is None:
        ordered = sorted(runs, key=lambda r: (r["model"], r["cell"], r["recon"], r["seed"]))
        return [[r["model"], r["cell"], r["recon"], r["accuracy"], r["n"], r["seed"]] for r in ordered]
    index = {(r["model"], r["recon"], r["cell"]): r for r in runs}
    rows = []
    for model, recon in models:
        for cell in cells:
            run = index.get((model, recon, cell))
            if run is None:
                rows.append([model, cell, recon, None, None, None])
            else:
                rows.append([model, cell, recon, run["accuracy"], run["n"], run["seed"]])
    return rows


def improvement_rows(runs: list) -> list:
    """sigma_vae - mse accuracy for every (model, cell) evaluated with both losses."""
    by_key = {}
    for r in runs:
        by_key.setdefault((r["model"], r["cell"]), {})[r["recon"]] = float(r["accuracy"])
    rows = []
    for (model, cell), accs in sorted(by_key.items()):
        if "mse" in accs and "sigma_vae" in accs:
            rows.append([model, cell, accs["mse"], accs["sigma_vae"], accs["sigma_vae"] - accs["mse"]])
    if rows:
        mean = sum(r[4] for r in rows) / len(rows)
        rows.append(["mean", "", None, None, mean])
    return rows


def curve_rows(runs: list) -> list:
    rows = []
    for r in sorted(runs, key=lambda r: r["run"]):
        for threshold, accuracy in r.get("curve") or []:
            rows.append([r["run"], float(threshold), float(accuracy)])
    return rows


def _write_csv(path: str, header: tuple, rows: list):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def grid_report(runs: list, out_path: str, models: Optional[list] = None, cells: Optional[list] = None) -> dict:
    """Write the three CSV files; returns their paths."""
    os.makedirs(out_path, exist_ok=True)
    paths = {
        "grid": os.path.join(out_path, GRID_FILE),
        "improvement": os.path.join(out_path, IMPROVEMENT_FILE),
        "curves": os.path.join(out_path, CURVES_FILE),
    }
    _write_csv(paths["grid"], GRID_HEADER, grid_rows(runs, models, cells))
    _write_csv(paths["improvement"], IMPROVEMENT_HEADER, improvement_rows(runs))
    _write_csv(paths["curves"], CURVES_HEADER, curve_rows(runs))
    logger.info("Wrote grid report for %d runs to %s", len(runs), out_path)
    return paths


def read_grid(path: str) -> list:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))
