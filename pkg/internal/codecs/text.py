"""Instruction codec: token embedding + transformer, categorical decoder.

Tokens are embedded into a very small feature space (2 by default), lifted to
the transformer width, and encoded with distribution tokens. PAD positions
are masked out of attention.
"""

import torch
from torch import nn

from internal.codecs.sequence import DistributionTokenEncoder, QueryDecoder
from internal.distributions.gaussian import DiagonalGaussian, LOG_VAR_MIN, LOG_VAR_MAX
from internal.models.errors import ConfigError, ShapeError, VocabularyError


class TextEncoder(nn.Module):

    def __init__(
        self, vocab_size: int, pad_index: int, l_max: int, embed_dim: int, width: int,
        layers: int, heads: int, ff: int, latent_dim: int, dropout: float = 0.0,
        log_var_min: float = LOG_VAR_MIN, log_var_max: float = LOG_VAR_MAX,
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.pad_index = pad_index
        self.l_max = l_max
        self.embedding = nn.Embedding(vocab_size, embed_dim)
        self.lift = nn.Linear(embed_dim, width)
        self.body = DistributionTokenEncoder(
            width, layers, heads, ff, latent_dim, dropout, log_var_min, log_var_max,
        )

    def forward(self, tokens: torch.Tensor) -> DiagonalGaussian:
        """tokens: (B, L) vocabulary indices, PAD-padded."""
        if tokens.dim() != 2 or tokens.shape[1] > self.l_max:
            raise ShapeError(f"tokens must be (B, L<={self.l_max}), got {tuple(tokens.shape)}")
        if (tokens < 0).any() or (tokens >= self.vocab_size).any():
            raise VocabularyError(f"token index outside vocabulary of size {self.vocab_size}")
        h = self.lift(self.embedding(tokens.long()))
        return self.body(h, tokens != self.pad_index)


class TextDecoder(nn.Module):

    def __init__(
        self, latent_dim: int, vocab_size: int, l_max: int, width: int,
        layers: int, heads: int, ff: int, dropout: float = 0.0,
    ):
        super().__init__()
        self.l_max = l_max
        self.body = QueryDecoder(latent_dim, width, layers, heads, ff, vocab_size, dropout)

    def forward(self, z: torch.Tensor, length: int) -> torch.Tensor:
        """(..., D_z) -> (..., length, V) categorical logits."""
        if not 1 <= length <= self.l_max:
            raise ConfigError(f"text length must be in [1, {self.l_max}], got {length}")
        return self.body(z, length)


def greedy_tokens(logits: torch.Tensor) -> torch.Tensor:
    return torch.argmax(logits, dim=-1)
