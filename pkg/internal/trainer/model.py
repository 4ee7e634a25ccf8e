"""MultimodalVAE: per-modality codecs bound to a fusion rule and objective.

model_kind selects both:
  mvae   PoE joint posterior (prior expert optional), ELBO over a subset schedule
  mopoe  MoPoE mixture over the modality powerset, ELBO on the full set
  mmvae  uniform MoE over unimodal experts, IWAE with DReG on the full set
"""

import logging
from typing import Optional

import numpy as np
import torch
from torch import nn

from internal.codecs.image import ImageDecoder, ImageEncoder
from internal.codecs.text import TextDecoder, TextEncoder
from internal.codecs.trajectory import TrajectoryDecoder, TrajectoryEncoder
from internal.distributions.gaussian import DiagonalGaussian
from internal.fusion.experts import (
    ExpertSet, JointPosterior, mixture_components, mopoe_components, poe_posterior,
)
from internal.fusion.schedule import subset_schedule
from internal.models.errors import ConfigError
from internal.models.types import Batch, LossBreakdown, ModelConfig, MODALITIES
from internal.objectives.elbo import multimodal_elbo
from internal.objectives.iwae import iwae_dreg

logger = logging.getLogger(__name__)


class MultimodalVAE(nn.Module):

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config.check()
        c = config
        bounds = (c.log_var_min, c.log_var_max)
        self.encoders = nn.ModuleDict({
            "image": ImageEncoder(c.image_size, c.image_channels, c.latent_dim, *bounds),
            "text": TextEncoder(
                len(c.vocabulary), c.pad_index, c.l_max, c.text_embed_dim, c.text_width,
                c.text_layers, c.text_heads, c.text_ff, c.latent_dim, c.dropout, *bounds,
            ),
            "trajectory": TrajectoryEncoder(
                c.traj_width, c.traj_layers, c.traj_heads, c.traj_ff, c.latent_dim, c.dropout, *bounds,
            ),
        })
        self.decoders = nn.ModuleDict({
            "image": ImageDecoder(c.image_size, c.image_channels, c.latent_dim, c.image_hidden),
            "text": TextDecoder(
                c.latent_dim, len(c.vocabulary), c.l_max, c.text_width,
                c.text_layers, c.text_heads, c.text_ff, c.dropout,
            ),
            "trajectory": TrajectoryDecoder(
                c.latent_dim, c.traj_width, c.traj_layers, c.traj_heads, c.traj_ff, c.t_max, c.dropout,
            ),
        })
        self.to(c.torch_dtype)

    # ── Encoding / fusion ────────────────────────────────────────────────

    def encode_one(self, modality: str, batch: Batch) -> DiagonalGaussian:
        if modality == "image":
            return self.encoders["image"](batch.images)
        if modality == "text":
            return self.encoders["text"](batch.tokens)
        if modality == "trajectory":
            return self.encoders["trajectory"](batch.trajectory, batch.trajectory_mask)
        raise ConfigError(f"unknown modality '{modality}'")

    def encode(self, batch: Batch, modalities: tuple = MODALITIES) -> ExpertSet:
        """Experts for the given modalities, in canonical modality order."""
        unknown = set(modalities) - set(MODALITIES)
        if unknown or not modalities:
            raise ConfigError(f"modalities must be a non-empty subset of {MODALITIES}, got {modalities}")
        ordered = [m for m in MODALITIES if m in modalities]
        return ExpertSet(
            [self.encode_one(m, batch) for m in ordered],
            tuple(m in modalities for m in MODALITIES),
        )

    def joint_posterior(self, experts: ExpertSet) -> JointPosterior:
        kind = self.config.model_kind
        if kind == "mvae":
            return poe_posterior(experts, self.config.include_prior)
        if kind == "mopoe":
            return mopoe_components(experts, self.config.include_empty_subset)
        return mixture_components(experts)

    # ── Decoding ──────────────────────────────────────────────────────────

    def decode(self, z: torch.Tensor, traj_length: int, text_length: int) -> dict:
        return {
            "image": self.decoders["image"](z),
            "text": self.decoders["text"](z, text_length),
            "trajectory": self.decoders["trajectory"](z, traj_length),
        }

    def decode_all(self, z: torch.Tensor, batch: Batch) -> dict:
        return self.decode(z, batch.traj_length, batch.text_length)

    # ── Objective ─────────────────────────────────────────────────────────

    def loss(
        self,
        batch: Batch,
        noise_rng: torch.Generator,
        schedule_rng: Optional[np.random.Generator] = None,
    ) -> LossBreakdown:
        """Training objective for this model kind on one batch."""
        c = self.config
        if c.objective_kind == "iwae_dreg":
            return iwae_dreg(batch, self, c.iwae_k, c.beta, c.recon_kinds, noise_rng)
        if c.model_kind == "mvae":
            schedule = subset_schedule(len(MODALITIES), c.subset_strategy, schedule_rng)
            return multimodal_elbo(batch, self, "poe", schedule, c.beta, c.recon_kinds, noise_rng)
        schedule = subset_schedule(len(MODALITIES), "full_only")
        return multimodal_elbo(batch, self, "mopoe", schedule, c.beta, c.recon_kinds, noise_rng)
