"""Training loop.

Flow:
  1. Check the dataset against the model config (vocabulary, sizes)
  2. Build the model under a seed-derived torch seed, or restore it from a
     checkpoint when resuming
  3. For each epoch: shuffle, step Adam over minibatches, log the
     size-weighted mean LossBreakdown as one JSON line
  4. Checkpoint every `checkpoint_every` epochs and after the last one

Random streams (all derived from the one seed): "init" for parameters,
"shuffle" for minibatch order, "schedule" for MVAE subset schedules,
"noise" for reparameterization noise. All of them are checkpointed.
"""

import json
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Optional

import torch

from internal.models.errors import ConfigError, InvalidDistributionError, TrainingDivergedError
from internal.models.seeding import derive_seed, numpy_rng, torch_generator
from internal.models.types import Batch, ModelConfig
from internal.scenegen.dataset import Dataset
from internal.trainer.checkpoint import load_checkpoint, save_checkpoint
from internal.trainer.model import MultimodalVAE

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.ckpt"
LOSS_LOG_FILE = "loss.jsonl"
RUN_FILE = "run.json"
OPTIMIZER_NAME = "adam"

_RECORD_FIELDS = ("total", "recon_image", "recon_text", "recon_traj", "kl")


@dataclass
class TrainResult:
    model: MultimodalVAE
    checkpoint_path: str
    history: list = field(default_factory=list)


def check_compatible(config: ModelConfig, dataset: Dataset):
    """Raise ConfigError listing every mismatch between dataset and config."""
    errors = []
    shapes = dataset.manifest["shapes"]
    if list(dataset.manifest["vocabulary"]) != list(config.vocabulary):
        errors.append("dataset vocabulary differs from the model vocabulary")
    if shapes["images"][1:] != [config.image_size, config.image_size, 3]:
        errors.append(f"dataset images are {shapes['images'][1:]}, model expects {config.image_size}x{config.image_size}x3")
    if shapes["text"][1] > config.l_max:
        errors.append(f"dataset instructions have {shapes['text'][1]} tokens, model l_max is {config.l_max}")
    if dataset.manifest["trajectory_lengths"]["max"] > config.t_max:
        errors.append(f"dataset trajectories reach {dataset.manifest['trajectory_lengths']['max']} steps, model t_max is {config.t_max}")
    if errors:
        raise ConfigError("; ".join(errors))


def dataset_batch(dataset: Dataset, dtype: torch.dtype) -> Batch:
    """The whole dataset as one Batch, trajectories trimmed to the longest valid length."""
    t_used = int(dataset.trajectory_mask.sum(axis=1).max())
    return Batch.from_arrays(
        dataset.images,
        dataset.tokens,
        dataset.trajectory[:, :t_used],
        dataset.trajectory_mask[:, :t_used],
        dtype,
    )


def _checkpoint_state(model, optimizer, epoch, history, rngs, train_meta) -> dict:
    shuffle_rng, schedule_rng, noise_gen = rngs
    return {
        "config": model.config.to_dict(),
        "epoch": epoch,
        "model": model.state_dict(),
        "optimizer": optimizer.state_dict(),
        "rng": {
            "shuffle": shuffle_rng.bit_generator.state,
            "schedule": schedule_rng.bit_generator.state,
            "noise": noise_gen.get_state(),
        },
        "history": list(history),
        "train": dict(train_meta),
    }


def build_model(config: ModelConfig, seed: int) -> MultimodalVAE:
    torch.manual_seed(derive_seed(seed, "init"))
    return MultimodalVAE(config)


def load_model(path: str) -> tuple:
    """(model, checkpoint state) from a checkpoint file; model in eval mode."""
    state = load_checkpoint(path)
    model = MultimodalVAE(ModelConfig.from_dict(state["config"]))
    model.load_state_dict(state["model"])
    model.eval()
    return model, state


def _write_history(out_path: str, history: list):
    with open(os.path.join(out_path, LOSS_LOG_FILE), "w") as f:
        for record in history:
            f.write(json.dumps(record, sort_keys=True) + "\n")


def train(
    config: ModelConfig,
    dataset: Dataset,
    seed: int,
    out_path: str,
    epochs: Optional[int] = None,
    batch_size: Optional[int] = None,
    step_size: Optional[float] = None,
    resume: Optional[str] = None,
) -> TrainResult:
    """Train a model; `epochs` more epochs are run when resuming."""
    config.check()
    check_compatible(config, dataset)
    epochs = config.epochs if epochs is None else epochs
    batch_size = config.batch_size if batch_size is None else batch_size
    step_size = config.step_size if step_size is None else step_size
    if epochs < 0 or batch_size < 1 or step_size <= 0:
        raise ConfigError("epochs >= 0, batch_size >= 1 and step_size > 0 are required")
    os.makedirs(out_path, exist_ok=True)
    ckpt_path = os.path.join(out_path, CHECKPOINT_FILE)

    model = build_model(config, seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=step_size)
    shuffle_rng = numpy_rng(seed, "shuffle")
    schedule_rng = numpy_rng(seed, "schedule")
    noise_gen = torch_generator(seed, "noise")
    history = []
    start_epoch = 1

    if resume:
        state = load_checkpoint(resume)
        if state["config"] != config.to_dict():
            raise ConfigError(f"checkpoint {resume} was trained with a different model config")
        model.load_state_dict(state["model"])
        optimizer.load_state_dict(state["optimizer"])
        shuffle_rng.bit_generator.state = state["rng"]["shuffle"]
        schedule_rng.bit_generator.state = state["rng"]["schedule"]
        noise_gen.set_state(state["rng"]["noise"])
        history = list(state["history"])
        start_epoch = state["epoch"] + 1
        logger.info("Resuming from %s at epoch %d", resume, start_epoch)

    train_meta = {
        "optimizer": OPTIMIZER_NAME,
        "step_size": step_size,
        "batch_size": batch_size,
        "seed": seed,
        "dataset_cell": dataset.manifest["config"]["name"],
        "dataset_seed": dataset.manifest["seed"],
        "dataset_n": dataset.manifest["n"],
    }
    with open(os.path.join(out_path, RUN_FILE), "w") as f:
        json.dump({"model": config.to_dict(), "train": train_meta}, f, indent=2, sort_keys=True)
        f.write("\n")

    rngs = (shuffle_rng, schedule_rng, noise_gen)
    data = dataset_batch(dataset, config.torch_dtype)
    n = data.size
    last_good = resume
    model.train()

    for epoch in range(start_epoch, start_epoch + epochs):
        sums = {key: 0.0 for key in _RECORD_FIELDS}
        order = torch.as_tensor(shuffle_rng.permutation(n))
        for start in range(0, n, batch_size):
            batch = data.select(order[start:start + batch_size])
            try:
                loss = model.loss(batch, noise_gen, schedule_rng)
            except InvalidDistributionError as e:
                raise TrainingDivergedError(f"epoch {epoch}: {e}", last_good)
            if not math.isfinite(float(loss.total.detach())):
                raise TrainingDivergedError(f"epoch {epoch}: loss is {float(loss.total)}", last_good)
            optimizer.zero_grad()
            loss.backward_target().backward()
            optimizer.step()
            record = loss.to_record()
            for key in _RECORD_FIELDS:
                sums[key] += record[key] * batch.size

        entry = {"epoch": epoch, "objective_kind": config.objective_kind}
        entry.update({key: value / n for key, value in sums.items()})
        history.append(entry)
        _write_history(out_path, history)
        logger.info(
            "epoch %d total=%.4f kl=%.4f (%s)", epoch, entry["total"], entry["kl"], config.objective_kind,
        )

        is_last = epoch == start_epoch + epochs - 1
        if is_last or (config.checkpoint_every and epoch % config.checkpoint_every == 0):
            save_checkpoint(_checkpoint_state(model, optimizer, epoch, history, rngs, train_meta), ckpt_path)
            last_good = ckpt_path

    if epochs == 0:
        save_checkpoint(
            _checkpoint_state(model, optimizer, start_epoch - 1, history, rngs, train_meta), ckpt_path,
        )
    model.eval()
    return TrainResult(model=model, checkpoint_path=ckpt_path, history=history)
