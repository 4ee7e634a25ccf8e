"""Sinusoidal positional encodings for the transformer sequence codecs."""

import torch

from internal.models.errors import ConfigError


def positional_encoding(length: int, width: int, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """(length, width) table: column 2i = sin(t / 10000^(2i/width)), 2i+1 = cos(...)."""
    if width % 2 != 0:
        raise ConfigError(f"positional encoding width must be even, got {width}")
    if length < 0:
        raise ConfigError(f"positional encoding length must be >= 0, got {length}")
    i = torch.arange(width // 2, dtype=torch.float64)
    denom = torch.pow(torch.tensor(10000.0, dtype=torch.float64), 2.0 * i / width)
    positions = torch.arange(length, dtype=torch.float64).unsqueeze(1)
    angles = positions / denom
    # interleave sin/cos along the last axis
    table = torch.stack((torch.sin(angles), torch.cos(angles)), dim=-1).reshape(length, width)
    return table.to(dtype)
