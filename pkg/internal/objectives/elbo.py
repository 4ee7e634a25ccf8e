"""Multimodal evidence lower bound.

For every modality subset in the schedule:
  1. Take the experts of the subset's modalities
  2. Fuse them (PoE, or the MoPoE mixture over the subset's powerset)
  3. Draw one reparameterized latent per datum (mixtures: datum b uses
     component b mod C)
  4. Decode every modality and score it against the full batch
  5. Add beta * KL to the prior

The returned loss is the mean over subsets of the per-datum mean.
"""

import logging
from typing import Optional

import torch

from internal.distributions.gaussian import (
    kl_to_standard_normal, log_prob, standard_normal_like,
)
from internal.fusion.experts import mopoe_components, poe_posterior, JointPosterior
from internal.models.errors import ConfigError
from internal.models.types import Batch, LossBreakdown, MODALITIES
from internal.objectives.recon import modality_nll

logger = logging.getLogger(__name__)

VALID_FUSIONS = ("poe", "mopoe")
VALID_KL_MODES = ("analytic", "monte_carlo")


def _per_datum_sample(jp: JointPosterior, noise: torch.Tensor) -> torch.Tensor:
    """One latent per datum; datum b is drawn from component b mod C."""
    batch = noise.shape[0]
    choice = torch.arange(batch) % len(jp)
    means = torch.stack([d.mean for d in jp.dists], dim=0)
    stds = torch.stack([d.std for d in jp.dists], dim=0)
    rows = torch.arange(batch)
    return means[choice, rows] + stds[choice, rows] * noise


def _kl(jp: JointPosterior, z: torch.Tensor, kl_mode: str) -> torch.Tensor:
    if kl_mode == "analytic":
        # mixture: weighted average of component KLs (an upper bound on the mixture KL)
        return sum(w * kl_to_standard_normal(d) for w, d in jp.components)
    prior = standard_normal_like(jp.dists[0])
    return jp.log_prob(z) - log_prob(prior, z)


def multimodal_elbo(
    batch: Batch,
    model,
    fusion_kind: str,
    schedule: list,
    beta: float,
    recon_kinds: dict,
    rng: torch.Generator,
    kl_mode: str = "analytic",
    present: tuple = MODALITIES,
    include_prior: Optional[bool] = None,
    include_empty_subset: Optional[bool] = None,
    subset_sizes: Optional[tuple] = None,
) -> LossBreakdown:
    """Negative ELBO (lower is better) averaged over the subset schedule.

    `schedule` holds expert-index subsets into `present`. `model` must expose
    `config`, `encode(batch, modalities)` and `decode_all(z, batch)`.
    """
    if not schedule:
        raise ConfigError("subset schedule is empty")
    if fusion_kind not in VALID_FUSIONS:
        raise ConfigError(f"fusion_kind must be one of {VALID_FUSIONS}, got '{fusion_kind}'")
    if kl_mode not in VALID_KL_MODES:
        raise ConfigError(f"kl_mode must be one of {VALID_KL_MODES}, got '{kl_mode}'")
    cfg = model.config
    if include_prior is None:
        include_prior = cfg.include_prior
    if include_empty_subset is None:
        include_empty_subset = cfg.include_empty_subset

    experts = model.encode(batch, present)
    dtype = experts.experts[0].mean.dtype
    totals, kls = [], []
    recon_sums = {m: [] for m in MODALITIES}

    for subset in schedule:
        chosen = experts.subset(subset)
        if fusion_kind == "poe":
            jp = poe_posterior(chosen, include_prior)
        else:
            jp = mopoe_components(chosen, include_empty_subset, subset_sizes)
        noise = torch.randn((1, batch.size, cfg.latent_dim), generator=rng, dtype=dtype)[0]
        z = _per_datum_sample(jp, noise)
        nll = modality_nll(batch, model.decode_all(z, batch), recon_kinds, cfg.sigma_min_sq, cfg.pad_index)
        kl = _kl(jp, z, kl_mode)
        recon = sum(nll.values())
        totals.append((recon + beta * kl).mean())
        kls.append(kl.mean())
        for modality, value in nll.items():
            recon_sums[modality].append(value.mean())

    n = len(schedule)
    return LossBreakdown(
        total=sum(totals) / n,
        per_modality_recon={m: sum(v) / n for m, v in recon_sums.items() if v},
        kl=sum(kls) / n,
        objective_kind="elbo",
    )
