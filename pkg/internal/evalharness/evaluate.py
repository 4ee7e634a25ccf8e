"""Task-success evaluation and threshold-accuracy curves.

Test scenes come from the "eval:<i>" seed namespace, disjoint from the
"<cell>:trial:<i>" namespace used for training data. Each trial:
  1. Sample a scene, render it (quantized like the dataset), build the instruction
  2. Ask the predictor for a trajectory of the task's scripted median length
  3. Score it with check_success
Failures inside a trial are logged and counted as unsuccessful.
"""

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Optional, Protocol

import numpy as np

from internal.evalharness.infer import infer_trajectory
from internal.models.errors import ConfigError, MMVAEError
from internal.models.seeding import numpy_rng
from internal.models.types import Thresholds, VOCABULARY
from internal.scenegen.cells import CellConfig
from internal.scenegen.dataset import scripted_median_length
from internal.scenegen.kinematics import check_success
from internal.scenegen.language import make_instruction
from internal.scenegen.render import render_topview, to_uint8
from internal.scenegen.scene import SceneSpec, sample_scene
from internal.scenegen.script import synthesize_trajectory

logger = logging.getLogger(__name__)


class TrajectoryPredictor(Protocol):
    def predict(self, image: np.ndarray, tokens: np.ndarray, length: int, scene: SceneSpec) -> np.ndarray:
        ...


class ModelPredictor:
    """Cross-generates trajectories from image + instruction; never looks at the scene."""

    def __init__(self, model):
        self.model = model

    def predict(self, image, tokens, length, scene):
        return infer_trajectory(self.model, image, tokens, length)


class ScriptedOracle:
    """Replays the scripted demonstration for the scene."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def predict(self, image, tokens, length, scene):
        rng = numpy_rng(self.seed, f"oracle:{scene.to_dict()}")
        return synthesize_trajectory(scene, rng)


class ConstantPredictor:
    """Emits the same value at every step; a floor for sanity checks."""

    def __init__(self, value: float = 0.0):
        self.value = value

    def predict(self, image, tokens, length, scene):
        return np.full((length, 4), self.value, dtype=np.float64)


@dataclass
class TrialDiagnostics:
    trial: int
    task: str
    success: bool
    final_distance_m: float
    displacement_m: list
    max_height_gain_m: float
    length: int
    error: str = ""


@dataclass
class EvalResult:
    cell: str
    seed: int
    n_trials: int
    accuracy: float
    trials: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"cell": self.cell, "seed": self.seed, "n": self.n_trials, "accuracy": self.accuracy}


def evaluate_success(
    predictor: TrajectoryPredictor,
    cell: CellConfig,
    n_trials: int,
    seed: int,
    thresholds: Thresholds = Thresholds(),
    lengths: Optional[dict] = None,
) -> EvalResult:
    """Accuracy over n_trials fresh scenes; `lengths` overrides the per-task median lengths."""
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    if lengths is None:
        lengths = {task: scripted_median_length(cell, task, seed) for task in cell.tasks}

    trials = []
    for i in range(n_trials):
        rng = numpy_rng(seed, f"eval:{i}")
        task = ""
        length = 0
        try:
            scene = sample_scene(cell, rng)
            task = scene.task
            length = lengths[task]
            image = to_uint8(render_topview(scene, cell.image_size)).astype(np.float32) / 255.0
            tokens = make_instruction(scene, VOCABULARY, cell.l_max)
            trajectory = predictor.predict(image, tokens, length, scene)
            result = check_success(scene, trajectory, thresholds)
        except MMVAEError as e:
            logger.warning("Trial %d failed: %s", i, e)
            trials.append(TrialDiagnostics(i, task, False, math.inf, [0.0, 0.0, 0.0], 0.0, length, str(e)))
            continue
        trials.append(TrialDiagnostics(
            trial=i,
            task=task,
            success=result.success,
            final_distance_m=result.final_distance_m,
            displacement_m=[float(v) for v in result.displacement_m],
            max_height_gain_m=result.max_height_gain_m,
            length=len(trajectory),
        ))

    accuracy = sum(t.success for t in trials) / n_trials
    logger.info("Evaluated %d trials on %s: accuracy %.3f", n_trials, cell.name, accuracy)
    return EvalResult(cell=cell.name, seed=seed, n_trials=n_trials, accuracy=accuracy, trials=trials)


def check_thresholds(thresholds: list) -> list:
    if not thresholds:
        raise ConfigError("threshold list is empty")
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError(f"thresholds must be sorted ascending, got {thresholds}")
    return list(thresholds)


CURVE_TASKS = ("reach",)


def check_curve_cell(cell: CellConfig) -> CellConfig:
    """Curves sweep the reach distance threshold; other tasks have no distance rule to sweep."""
    other = [task for task in cell.tasks if task not in CURVE_TASKS]
    if other:
        raise ConfigError(
            f"threshold curves need reach-only cells; {cell.name} has {', '.join(other)}"
        )
    return cell


def curve_from_trials(trials: list, thresholds: list) -> list:
    """(threshold, accuracy) pairs: fraction of trials whose closest approach is below each threshold."""
    check_thresholds(thresholds)
    other = sorted({t.task for t in trials if t.task and t.task not in CURVE_TASKS})
    if other:
        raise ConfigError(f"threshold curves need reach trials, got {', '.join(other)}")
    distances = np.array([t.final_distance_m for t in trials], dtype=np.float64)
    return [(float(t), float(np.mean(distances < t))) for t in thresholds]


def threshold_curve(
    predictor: TrajectoryPredictor,
    cell: CellConfig,
    thresholds: list,
    n_trials: int,
    seed: int,
) -> list:
    check_thresholds(thresholds)
    check_curve_cell(cell)
    result = evaluate_success(predictor, cell, n_trials, seed)
    return curve_from_trials(result.trials, thresholds)


def trial_records(result: EvalResult) -> list:
    return [asdict(t) for t in result.trials]
