"""Factorized (diagonal) Gaussian distributions.

A DiagonalGaussian holds batched mean/log-variance tensors whose last axis is
the latent dimension D_z. It represents unimodal experts, fused posteriors and
the standard-normal prior (mean 0, log_var 0). All densities are in nats.
"""

from dataclasses import dataclass, field

import torch
import torch.distributions as D

from internal.models.errors import InvalidDistributionError, ShapeError

LOG_VAR_MIN = -10.0
LOG_VAR_MAX = 10.0


@dataclass
class DiagonalGaussian:
    """N(mean, diag(exp(log_var))) with log_var clamped at construction."""
    mean: torch.Tensor
    log_var: torch.Tensor
    log_var_min: float = field(default=LOG_VAR_MIN, repr=False)
    log_var_max: float = field(default=LOG_VAR_MAX, repr=False)

    def __post_init__(self):
        if self.mean.shape != self.log_var.shape:
            raise ShapeError(
                f"mean shape {tuple(self.mean.shape)} != log_var shape {tuple(self.log_var.shape)}"
            )
        if self.mean.dim() == 0 or self.mean.shape[-1] < 1:
            raise ShapeError("latent dimension must be >= 1")
        if not (torch.isfinite(self.mean).all() and torch.isfinite(self.log_var).all()):
            raise InvalidDistributionError("mean and log_var must be finite")
        self.log_var = torch.clamp(self.log_var, self.log_var_min, self.log_var_max)

    @property
    def latent_dim(self) -> int:
        return self.mean.shape[-1]

    @property
    def variance(self) -> torch.Tensor:
        return torch.exp(self.log_var)

    @property
    def std(self) -> torch.Tensor:
        return torch.exp(0.5 * self.log_var)

    def detach(self) -> "DiagonalGaussian":
        return DiagonalGaussian(
            self.mean.detach(), self.log_var.detach(), self.log_var_min, self.log_var_max,
        )


def standard_normal_like(q: DiagonalGaussian) -> DiagonalGaussian:
    """The fixed prior p(z) = N(0, I) with q's batch and latent shape."""
    return DiagonalGaussian(
        torch.zeros_like(q.mean), torch.zeros_like(q.log_var), q.log_var_min, q.log_var_max,
    )


def kl_to_standard_normal(q: DiagonalGaussian) -> torch.Tensor:
    """KL(q || N(0, I)) summed over the latent axis; one value per batch entry."""
    return 0.5 * torch.sum(torch.exp(q.log_var) + q.mean ** 2 - 1.0 - q.log_var, dim=-1)


def to_torch(q: DiagonalGaussian) -> D.Independent:
    """The same distribution as a torch.distributions object with event dim D_z."""
    return D.Independent(D.Normal(q.mean, q.std, validate_args=False), 1, validate_args=False)


def kl_divergence(q: DiagonalGaussian, p: DiagonalGaussian) -> torch.Tensor:
    """KL(q || p) between two diagonal Gaussians, summed over the latent axis."""
    if q.mean.shape[-1] != p.mean.shape[-1]:
        raise ShapeError(f"latent dims differ: {q.latent_dim} vs {p.latent_dim}")
    return D.kl_divergence(to_torch(q), to_torch(p))


def reparam_sample(q: DiagonalGaussian, noise: torch.Tensor) -> torch.Tensor:
    """z = mean + exp(0.5 * log_var) * noise, differentiable in mean and log_var.

    `noise` may carry leading sample axes: shape (..., *q.mean.shape).
    """
    event = tuple(q.mean.shape)
    if noise.dim() < len(event) or tuple(noise.shape[noise.dim() - len(event):]) != event:
        raise ShapeError(f"noise shape {tuple(noise.shape)} does not end with {event}")
    return q.mean + torch.exp(0.5 * q.log_var) * noise


def log_prob(q: DiagonalGaussian, z: torch.Tensor) -> torch.Tensor:
    """log q(z) summed over the latent axis; leading sample axes are preserved."""
    if z.shape[-1] != q.latent_dim:
        raise ShapeError(f"z has latent dim {z.shape[-1]}, expected {q.latent_dim}")
    try:
        return to_torch(q).log_prob(z)
    except RuntimeError as e:
        raise ShapeError(f"z shape {tuple(z.shape)} incompatible with {tuple(q.mean.shape)}: {e}")
