"""Reconstruction losses.

mse_recon, sigma_vae_recon, gaussian_nll and categorical_recon are the
whole-array scalar forms. modality_nll applies them per datum inside the
ELBO and IWAE objectives, where the sum over the datum's elements (not the
mean) is the negative log-likelihood that sits beside the KL term.
"""

import math
from typing import Optional

import torch
import torch.nn.functional as F

from internal.models.errors import EmptySequenceError, ShapeError, ConfigError
from internal.models.types import Batch

_LOG_2PI = math.log(2.0 * math.pi)


def _check_shapes(x: torch.Tensor, mu: torch.Tensor):
    if x.shape != mu.shape:
        raise ShapeError(f"x shape {tuple(x.shape)} != mu shape {tuple(mu.shape)}")


def mse_recon(x: torch.Tensor, mu: torch.Tensor) -> torch.Tensor:
    """(1/D) * sum (x - mu)^2 over all D elements."""
    _check_shapes(x, mu)
    return torch.mean((x - mu) ** 2)


def gaussian_nll(x: torch.Tensor, mu: torch.Tensor, var, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Negative log-likelihood of x under N(mu, var I), summed over (unmasked) elements."""
    _check_shapes(x, mu)
    var = torch.as_tensor(var, dtype=mu.dtype)
    terms = 0.5 * (_LOG_2PI + torch.log(var) + (x - mu) ** 2 / var)
    if mask is not None:
        terms = terms * mask.to(terms.dtype)
    return terms.sum()


def sigma_vae_recon(
    x: torch.Tensor, mu: torch.Tensor, sigma_min_sq: float, mask: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Gaussian NLL at the analytic optimal variance sigma*^2 = max(MSE, sigma_min_sq).

    sigma*^2 is a constant for autograd: gradients w.r.t. mu are those of the
    NLL at a fixed variance.
    """
    _check_shapes(x, mu)
    if sigma_min_sq <= 0:
        raise ConfigError("sigma_min_sq must be > 0")
    sq = (x - mu) ** 2
    if mask is not None:
        weights = mask.to(sq.dtype).expand_as(sq)
        sse = (sq * weights).sum()
        d = weights.sum()
    else:
        sse = sq.sum()
        d = torch.tensor(float(sq.numel()), dtype=sq.dtype)
    mse = sse / d
    var = torch.clamp(mse.detach(), min=sigma_min_sq)
    return 0.5 * d * (torch.log(2.0 * math.pi * var) + mse / var)


def categorical_recon(logits: torch.Tensor, targets: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
    """Mean cross-entropy over positions where pad_mask is False."""
    keep = ~pad_mask.bool()
    if not keep.any():
        raise EmptySequenceError("every position is masked")
    ce = F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1).long(), reduction="none")
    ce = ce.reshape(targets.shape)
    return ce[keep].mean()


# ── Per-datum likelihood terms ──────────────────────────────────────────────

def _categorical_per_datum(logits: torch.Tensor, targets: torch.Tensor, pad_index: int) -> torch.Tensor:
    """Summed cross-entropy over non-PAD positions; logits (..., B, L, V), targets (B, L)."""
    log_probs = F.log_softmax(logits, dim=-1)
    index = targets.long().expand(*logits.shape[:-1]).unsqueeze(-1)
    nll = -torch.gather(log_probs, -1, index).squeeze(-1)
    keep = (targets != pad_index).to(nll.dtype)
    return (nll * keep).sum(dim=-1)


def _gaussian_per_datum(sse, count, kind, sigma_min_sq, unit_variance_mse):
    if kind == "mse":
        if unit_variance_mse:
            return 0.5 * (sse + count * _LOG_2PI)
        return sse
    if kind == "sigma_vae":
        count = count.expand_as(sse)
        var = torch.clamp((sse.sum() / count.sum()).detach(), min=sigma_min_sq)
        return 0.5 * (count * torch.log(2.0 * math.pi * var) + sse / var)
    raise ConfigError(f"unknown reconstruction kind '{kind}'")


def modality_nll(
    batch: Batch,
    decoded: dict,
    recon_kinds: dict,
    sigma_min_sq: float,
    pad_index: int,
    unit_variance_mse: bool = False,
) -> dict:
    """Per-datum reconstruction NLL for each decoded modality.

    Decoded tensors may carry leading sample axes before the batch axis; the
    results have shape (..., B). σ-VAE estimates one σ*² per modality over
    every element in the call (all samples, all data). Trajectory terms only
    count valid timesteps; text terms skip PAD positions.
    """
    out = {}
    if "image" in decoded:
        mu = decoded["image"]
        sse = ((batch.images - mu) ** 2).sum(dim=(-3, -2, -1))
        count = torch.tensor(float(batch.images[0].numel()), dtype=mu.dtype)
        out["image"] = _gaussian_per_datum(sse, count, recon_kinds["image"], sigma_min_sq, unit_variance_mse)
    if "trajectory" in decoded:
        mu = decoded["trajectory"]
        mask = batch.trajectory_mask.to(mu.dtype)
        sse = (((batch.trajectory - mu) ** 2).sum(dim=-1) * mask).sum(dim=-1)
        count = mask.sum(dim=-1) * batch.trajectory.shape[-1]
        out["trajectory"] = _gaussian_per_datum(
            sse, count, recon_kinds["trajectory"], sigma_min_sq, unit_variance_mse,
        )
    if "text" in decoded:
        out["text"] = _categorical_per_datum(decoded["text"], batch.tokens, pad_index)
    return out
