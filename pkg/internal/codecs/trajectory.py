"""Trajectory codec (T x 4 end-effector x, y, z and gripper signal)."""

import torch
from torch import nn

from internal.codecs.sequence import DistributionTokenEncoder, QueryDecoder
from internal.distributions.gaussian import DiagonalGaussian, LOG_VAR_MIN, LOG_VAR_MAX
from internal.models.errors import ConfigError, ShapeError

STEP_FEATURES = 4
GRIPPER_COLUMN = 3


class TrajectoryEncoder(nn.Module):

    def __init__(
        self, width: int, layers: int, heads: int, ff: int, latent_dim: int,
        dropout: float = 0.0, log_var_min: float = LOG_VAR_MIN, log_var_max: float = LOG_VAR_MAX,
    ):
        super().__init__()
        self.embed = nn.Linear(STEP_FEATURES, width)
        self.body = DistributionTokenEncoder(
            width, layers, heads, ff, latent_dim, dropout, log_var_min, log_var_max,
        )

    def forward(self, steps: torch.Tensor, mask: torch.Tensor) -> DiagonalGaussian:
        """steps: (B, T, 4); mask: (B, T) bool, True on valid timesteps."""
        if steps.dim() != 3 or steps.shape[-1] != STEP_FEATURES:
            raise ShapeError(f"trajectory must be (B, T, 4), got {tuple(steps.shape)}")
        return self.body(self.embed(steps), mask.bool())


class TrajectoryDecoder(nn.Module):

    def __init__(
        self, latent_dim: int, width: int, layers: int, heads: int, ff: int,
        t_max: int, dropout: float = 0.0,
    ):
        super().__init__()
        self.t_max = t_max
        self.body = QueryDecoder(latent_dim, width, layers, heads, ff, STEP_FEATURES, dropout)

    def forward(self, z: torch.Tensor, length: int) -> torch.Tensor:
        """(..., D_z) -> (..., length, 4); the gripper column is squashed to [0, 1]."""
        if not 1 <= length <= self.t_max:
            raise ConfigError(f"trajectory length must be in [1, {self.t_max}], got {length}")
        raw = self.body(z, length)
        xyz = raw[..., :GRIPPER_COLUMN]
        grip = torch.sigmoid(raw[..., GRIPPER_COLUMN:])
        return torch.cat((xyz, grip), dim=-1)
