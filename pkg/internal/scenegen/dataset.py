"""Dataset writer and reader.

generate_dataset flow, per trial i (independent rng derived from
(seed, "<cell>:trial:<i>")):
  1. Sample a scene for the cell
  2. Render the top view
  3. Build the instruction tokens
  4. Script the demonstration and verify it with check_success
Then write the blobs, scenes.jsonl and manifest.json. Output bytes depend
only on (cell, n, seed).
"""

import json
import logging
import os
from collections import Counter
from dataclasses import asdict, dataclass

import numpy as np

from internal.models.errors import ConfigError, GenerationError, MMVAEError
from internal.models.seeding import numpy_rng
from internal.models.types import PAD_TOKEN, Thresholds, VOCABULARY
from internal.scenegen.blob import read_blob, write_blob
from internal.scenegen.cells import CellConfig, cell_from_dict
from internal.scenegen.kinematics import check_success
from internal.scenegen.language import make_instruction
from internal.scenegen.render import render_topview, to_uint8
from internal.scenegen.scene import SceneSpec, sample_scene
from internal.scenegen.script import synthesize_trajectory

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
BLOB_FILES = {
    "images": "images.bin",
    "text": "text.bin",
    "trajectory": "traj.bin",
    "trajectory_mask": "traj_mask.bin",
}
SCENES_FILE = "scenes.jsonl"


@dataclass
class Episode:
    scene: SceneSpec
    image: np.ndarray        # (H, W, 3) float32 in [0, 1]
    tokens: np.ndarray       # (L,) int64
    trajectory: np.ndarray   # (T, 4) float64, unpadded


@dataclass
class Dataset:
    manifest: dict
    images: np.ndarray           # (n, H, W, 3) uint8
    tokens: np.ndarray           # (n, L) uint16
    trajectory: np.ndarray       # (n, T_max, 4) float32
    trajectory_mask: np.ndarray  # (n, T_max) uint8
    scenes: list

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def cell(self) -> CellConfig:
        return cell_from_dict(self.manifest["config"])


def make_episode(cell: CellConfig, rng: np.random.Generator, task=None, thresholds: Thresholds = Thresholds()) -> Episode:
    scene = sample_scene(cell, rng, task)
    image = render_topview(scene, cell.image_size)
    tokens = make_instruction(scene, VOCABULARY, cell.l_max)
    trajectory = synthesize_trajectory(scene, rng)
    if len(trajectory) > cell.t_max:
        raise GenerationError(f"demonstration has {len(trajectory)} steps, t_max is {cell.t_max}")
    if not check_success(scene, trajectory, thresholds).success:
        raise GenerationError(f"demonstration for {scene.task} fails its own success check")
    return Episode(scene, image, tokens, trajectory)


def generate_dataset(cell: CellConfig, n_samples: int, seed: int, out_path: str) -> dict:
    """Generate n_samples episodes into out_path; returns the manifest."""
    if n_samples < 1:
        raise ConfigError("n_samples must be >= 1")
    thresholds = Thresholds()
    s = cell.image_size
    images = np.zeros((n_samples, s, s, 3), dtype=np.uint8)
    tokens = np.zeros((n_samples, cell.l_max), dtype=np.uint16)
    traj = np.zeros((n_samples, cell.t_max, 4), dtype=np.float32)
    mask = np.zeros((n_samples, cell.t_max), dtype=np.uint8)
    scenes = []
    lengths = []

    for i in range(n_samples):
        rng = numpy_rng(seed, f"{cell.name}:trial:{i}")
        try:
            episode = make_episode(cell, rng, thresholds=thresholds)
        except GenerationError as e:
            raise GenerationError(str(e), trial_index=i)
        t = len(episode.trajectory)
        images[i] = to_uint8(episode.image)
        tokens[i] = episode.tokens
        traj[i, :t] = episode.trajectory
        mask[i, :t] = 1
        scenes.append(episode.scene)
        lengths.append(t)

    os.makedirs(out_path, exist_ok=True)
    write_blob(os.path.join(out_path, BLOB_FILES["images"]), images)
    write_blob(os.path.join(out_path, BLOB_FILES["text"]), tokens)
    write_blob(os.path.join(out_path, BLOB_FILES["trajectory"]), traj)
    write_blob(os.path.join(out_path, BLOB_FILES["trajectory_mask"]), mask)
    with open(os.path.join(out_path, SCENES_FILE), "w") as f:
        for scene in scenes:
            f.write(json.dumps(scene.to_dict(), sort_keys=True) + "\n")

    manifest = {
        "format_version": FORMAT_VERSION,
        "config": cell.to_dict(),
        "seed": seed,
        "n": n_samples,
        "vocabulary": list(VOCABULARY),
        "pad_token": PAD_TOKEN,
        "thresholds": asdict(thresholds),
        "shapes": {
            "images": list(images.shape),
            "text": list(tokens.shape),
            "trajectory": list(traj.shape),
            "trajectory_mask": list(mask.shape),
        },
        "files": dict(BLOB_FILES, scenes=SCENES_FILE),
        "tasks": dict(sorted(Counter(scene.task for scene in scenes).items())),
        "trajectory_lengths": {"min": int(min(lengths)), "max": int(max(lengths))},
    }
    with open(os.path.join(out_path, MANIFEST), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Generated %d episodes for cell %s (seed %d) in %s", n_samples, cell.name, seed, out_path)
    return manifest


def load_dataset(path: str) -> Dataset:
    manifest_path = os.path.join(path, MANIFEST)
    if not os.path.exists(manifest_path):
        raise ConfigError(f"no {MANIFEST} in {path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported dataset format version {manifest.get('format_version')}")

    arrays = {key: read_blob(os.path.join(path, name)) for key, name in BLOB_FILES.items()}
    for key, array in arrays.items():
        if list(array.shape) != manifest["shapes"][key]:
            raise ConfigError(f"{key} blob has shape {list(array.shape)}, manifest says {manifest['shapes'][key]}")

    scenes = []
    scenes_path = os.path.join(path, SCENES_FILE)
    if os.path.exists(scenes_path):
        with open(scenes_path) as f:
            scenes = [SceneSpec.from_dict(json.loads(line)) for line in f if line.strip()]
    return Dataset(
        manifest=manifest,
        images=arrays["images"],
        tokens=arrays["text"],
        trajectory=arrays["trajectory"],
        trajectory_mask=arrays["trajectory_mask"],
        scenes=scenes,
    )


def scripted_median_length(cell: CellConfig, task: str, seed: int, n_trials: int = 25) -> int:
    """Median demonstration length for a task, rounded up to whole steps."""
    lengths = []
    for i in range(n_trials):
        rng = numpy_rng(seed, f"median:{cell.name}:{task}:{i}")
        try:
            lengths.append(len(synthesize_trajectory(sample_scene(cell, rng, task), rng)))
        except MMVAEError as e:
            logger.warning("Skipping median-length trial %d for %s: %s", i, task, e)
    if not lengths:
        raise GenerationError(f"no demonstration could be scripted for {task}")
    return int(np.ceil(np.median(lengths)))
