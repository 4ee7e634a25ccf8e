"""Importance-weighted bound with doubly reparameterized gradients (DReG).

Stop-gradient placement:
  - log q_MoE(z_k) is evaluated with detached posterior parameters for every
    modality; z_k itself keeps its reparameterized path to the encoders.
  - Normalized weights w_k = softmax_k(log w_k) are constants.
  - The surrogate -(sum_k w_k log w_k) gives decoders the w_k-weighted gradient;
    a hook on z multiplies the encoder-bound gradient by w_k once more, so
    encoders receive the w_k^2-weighted pathwise gradient.

K counts samples per mixture component: each of the C components contributes
exactly K draws, so the bound averages over K*C importance samples and every
expert gets a pathwise gradient at any K.

The reported `total` is the negative IWAE bound; `surrogate` is what the
trainer backpropagates.
"""

import logging
import math

import torch

from internal.distributions.gaussian import log_prob, standard_normal_like
from internal.fusion.experts import mixture_components, sample_mixture, stratified_choices
from internal.models.errors import ConfigError
from internal.models.types import Batch, LossBreakdown, MODALITIES
from internal.objectives.recon import modality_nll

logger = logging.getLogger(__name__)


def importance_bound(log_w: torch.Tensor) -> torch.Tensor:
    """log (1/K) sum_k exp(log_w_k) along the leading sample axis."""
    return torch.logsumexp(log_w, dim=0) - math.log(log_w.shape[0])


def iwae_dreg(
    batch: Batch,
    model,
    k: int,
    beta: float,
    recon_kinds: dict,
    rng: torch.Generator,
    present: tuple = MODALITIES,
) -> LossBreakdown:
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    cfg = model.config
    experts = model.encode(batch, present)
    jp = mixture_components(experts)
    dtype = experts.experts[0].mean.dtype

    n_samples = k * len(jp)
    noise = torch.randn((n_samples, batch.size, cfg.latent_dim), generator=rng, dtype=dtype)
    z, _ = sample_mixture(jp, n_samples, noise, stratified_choices(n_samples, len(jp)))

    log_q = jp.detach().log_prob(z)
    log_p = log_prob(standard_normal_like(jp.dists[0]), z)
    nll = modality_nll(
        batch, model.decode_all(z, batch), recon_kinds, cfg.sigma_min_sq, cfg.pad_index,
        unit_variance_mse=True,
    )
    log_w = -sum(nll.values()) + beta * (log_p - log_q)

    with torch.no_grad():
        weights = torch.softmax(log_w, dim=0)
    if z.requires_grad:
        z.register_hook(lambda grad: grad * weights.unsqueeze(-1))

    bound = importance_bound(log_w)
    return LossBreakdown(
        total=-bound.mean(),
        per_modality_recon={m: v.mean() for m, v in nll.items()},
        kl=(log_q - log_p).mean(),
        objective_kind="iwae_dreg",
        surrogate=-(weights * log_w).sum(dim=0).mean(),
    )
