"""Data types shared across the multimodal VAE toolkit."""

from dataclasses import dataclass, field, fields, asdict
from typing import Optional

import torch

from internal.models.errors import ConfigError, ShapeError


# Modality order is fixed; ExpertSet.present_mask and every per-modality map follow it.
MODALITIES = ("image", "text", "trajectory")

VALID_MODEL_KINDS = ("mvae", "mmvae", "mopoe")
VALID_RECON_KINDS = ("mse", "sigma_vae")
VALID_SUBSET_STRATEGIES = ("full_only", "mvae_standard")
VALID_INFERENCE_FUSIONS = ("poe", "component_average")
VALID_DTYPES = ("float32", "float64")

VOCABULARY = (
    "reach", "lift", "move", "left", "right", "the", "apple", "lemon",
    "soap", "put", "close", "drawer", "PAD",
)
PAD_TOKEN = "PAD"

# Objective used per model kind: mvae/mopoe train on the ELBO, mmvae on IWAE with DReG.
OBJECTIVE_FOR_MODEL = {"mvae": "elbo", "mopoe": "elbo", "mmvae": "iwae_dreg"}


@dataclass(frozen=True)
class Thresholds:
    """Geometric success thresholds (meters)."""
    reach_m: float = 0.06
    move_m: float = 0.10
    lift_m: float = 0.10


@dataclass
class ModelConfig:
    """Architecture, objective, and optimization settings for one model.

    Defaults are desk scale: small codecs that train on a laptop CPU. The
    published-scale trajectory transformer (8 layers, 1024 feed-forward) is
    reachable by overriding traj_layers/traj_ff.
    """
    model_kind: str = "mvae"
    latent_dim: int = 12
    recon_image: str = "sigma_vae"
    recon_trajectory: str = "sigma_vae"
    beta: float = 1.0
    iwae_k: int = 10
    sigma_min_sq: float = 1e-6

    image_size: int = 64
    t_max: int = 80
    l_max: int = 8
    vocabulary: tuple = VOCABULARY

    image_channels: tuple = (32, 32, 64, 64)
    image_hidden: int = 256
    traj_width: int = 64
    traj_layers: int = 2
    traj_heads: int = 2
    traj_ff: int = 128
    text_embed_dim: int = 2
    text_width: int = 16
    text_layers: int = 1
    text_heads: int = 2
    text_ff: int = 128
    dropout: float = 0.0

    log_var_min: float = -10.0
    log_var_max: float = 10.0
    include_prior: bool = True
    include_empty_subset: bool = True
    subset_strategy: str = "mvae_standard"
    inference_fusion: str = "poe"
    dtype: str = "float32"

    batch_size: int = 32
    epochs: int = 200
    step_size: float = 1e-3
    checkpoint_every: int = 50

    @property
    def objective_kind(self) -> str:
        return OBJECTIVE_FOR_MODEL.get(self.model_kind, "elbo")

    @property
    def torch_dtype(self) -> torch.dtype:
        return torch.float64 if self.dtype == "float64" else torch.float32

    @property
    def recon_kinds(self) -> dict:
        return {"image": self.recon_image, "trajectory": self.recon_trajectory, "text": "categorical"}

    @property
    def pad_index(self) -> int:
        return list(self.vocabulary).index(PAD_TOKEN)

    def validate(self) -> list:
        """Return a list of validation errors (empty if valid)."""
        errors = []
        if self.model_kind not in VALID_MODEL_KINDS:
            errors.append(f"model_kind must be one of {VALID_MODEL_KINDS}")
        for name in ("recon_image", "recon_trajectory"):
            if getattr(self, name) not in VALID_RECON_KINDS:
                errors.append(f"{name} must be one of {VALID_RECON_KINDS}")
        if self.subset_strategy not in VALID_SUBSET_STRATEGIES:
            errors.append(f"subset_strategy must be one of {VALID_SUBSET_STRATEGIES}")
        if self.inference_fusion not in VALID_INFERENCE_FUSIONS:
            errors.append(f"inference_fusion must be one of {VALID_INFERENCE_FUSIONS}")
        if self.dtype not in VALID_DTYPES:
            errors.append(f"dtype must be one of {VALID_DTYPES}")
        if self.latent_dim < 1:
            errors.append("latent_dim must be >= 1")
        if self.iwae_k < 1:
            errors.append("iwae_k must be >= 1")
        if self.beta < 0:
            errors.append("beta must be >= 0")
        if self.sigma_min_sq <= 0:
            errors.append("sigma_min_sq must be > 0")
        if self.image_size < 8 or self.image_size % 8 != 0:
            errors.append("image_size must be a positive multiple of 8")
        if len(self.image_channels) != 4:
            errors.append("image_channels must list exactly 4 block widths")
        if self.t_max < 1 or self.l_max < 1:
            errors.append("t_max and l_max must be >= 1")
        if PAD_TOKEN not in self.vocabulary:
            errors.append(f"vocabulary must contain {PAD_TOKEN}")
        for width, heads, label in (
            (self.traj_width, self.traj_heads, "traj"),
            (self.text_width, self.text_heads, "text"),
        ):
            if width % 2 != 0:
                errors.append(f"{label}_width must be even (sinusoidal positional encoding)")
            if heads < 1 or width % heads != 0:
                errors.append(f"{label}_width must be divisible by {label}_heads")
        if self.log_var_min >= self.log_var_max:
            errors.append("log_var_min must be < log_var_max")
        if self.batch_size < 1 or self.epochs < 0 or self.step_size <= 0:
            errors.append("batch_size >= 1, epochs >= 0 and step_size > 0 are required")
        return errors

    def check(self) -> "ModelConfig":
        errors = self.validate()
        if errors:
            raise ConfigError("; ".join(errors))
        return self

    def to_dict(self) -> dict:
        data = asdict(self)
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown model config keys: {unknown}")
        values = {}
        for key, value in data.items():
            values[key] = tuple(value) if isinstance(value, list) else value
        return cls(**values)


@dataclass
class LossBreakdown:
    """One evaluation of a training objective.

    `total` is the reported objective value (negative bound, lower is better);
    `surrogate` is the tensor to backpropagate. They coincide for the ELBO and
    differ for IWAE with DReG, whose surrogate carries the reweighted gradients.
    """
    total: torch.Tensor
    per_modality_recon: dict
    kl: torch.Tensor
    objective_kind: str
    surrogate: Optional[torch.Tensor] = field(default=None, repr=False)

    def backward_target(self) -> torch.Tensor:
        return self.surrogate if self.surrogate is not None else self.total

    def to_record(self) -> dict:
        """Flatten into the per-epoch loss-log record fields."""
        recon = {m: float(v.detach()) for m, v in self.per_modality_recon.items()}
        return {
            "total": float(self.total.detach()),
            "recon_image": recon.get("image", 0.0),
            "recon_text": recon.get("text", 0.0),
            "recon_traj": recon.get("trajectory", 0.0),
            "kl": float(self.kl.detach()),
            "objective_kind": self.objective_kind,
        }


@dataclass
class Batch:
    """A minibatch of aligned episodes.

    images:          (B, H, W, 3) in [0, 1]
    tokens:          (B, L) vocabulary indices, PAD-padded
    trajectory:      (B, T, 4) end-effector x, y, z and gripper signal
    trajectory_mask: (B, T) bool, True on valid timesteps
    """
    images: torch.Tensor
    tokens: torch.Tensor
    trajectory: torch.Tensor
    trajectory_mask: torch.Tensor

    def __post_init__(self):
        sizes = {
            self.images.shape[0], self.tokens.shape[0],
            self.trajectory.shape[0], self.trajectory_mask.shape[0],
        }
        if len(sizes) != 1:
            raise ShapeError(f"batch entries disagree on batch size: {sorted(sizes)}")
        if self.trajectory_mask.shape != self.trajectory.shape[:2]:
            raise ShapeError("trajectory_mask must be (B, T)")

    @property
    def size(self) -> int:
        return self.images.shape[0]

    @property
    def traj_length(self) -> int:
        return self.trajectory.shape[1]

    @property
    def text_length(self) -> int:
        return self.tokens.shape[1]

    def select(self, index) -> "Batch":
        return Batch(
            self.images[index], self.tokens[index],
            self.trajectory[index], self.trajectory_mask[index],
        )

    @classmethod
    def from_arrays(cls, images, tokens, trajectory, trajectory_mask, dtype=torch.float32) -> "Batch":
        """Build from numpy arrays as stored in the dataset blobs."""
        pixels = torch.as_tensor(images).to(dtype)
        if images.dtype.kind == "u":
            pixels = pixels / 255.0
        return cls(
            images=pixels,
            tokens=torch.as_tensor(tokens.astype("int64")),
            trajectory=torch.as_tensor(trajectory).to(dtype),
            trajectory_mask=torch.as_tensor(trajectory_mask).bool(),
        )
