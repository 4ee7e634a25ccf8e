"""Transformer building blocks shared by the trajectory and text codecs.

The encoder prepends two learned distribution tokens (one for the mean, one
for the log-variance) to the embedded sequence and reads the posterior off
their outputs. No action-conditioning bias is added to the tokens: the joint
posterior already conditions the latent on the other modalities.

The decoder turns a latent into a sequence of any length: positional-encoding
queries attend to the projected latent through a transformer decoder stack.
"""

import torch
from torch import nn

from internal.codecs.positional import positional_encoding
from internal.distributions.gaussian import DiagonalGaussian, LOG_VAR_MIN, LOG_VAR_MAX
from internal.models.errors import EmptySequenceError, ShapeError


class DistributionTokenEncoder(nn.Module):

    def __init__(
        self,
        width: int,
        layers: int,
        heads: int,
        ff: int,
        latent_dim: int,
        dropout: float = 0.0,
        log_var_min: float = LOG_VAR_MIN,
        log_var_max: float = LOG_VAR_MAX,
    ):
        super().__init__()
        self.width = width
        self.log_var_min = log_var_min
        self.log_var_max = log_var_max
        self.mu_token = nn.Parameter(torch.randn(width) * 0.02)
        self.sigma_token = nn.Parameter(torch.randn(width) * 0.02)
        layer = nn.TransformerEncoderLayer(
            d_model=width, nhead=heads, dim_feedforward=ff, dropout=dropout,
            activation="gelu", batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=layers, enable_nested_tensor=False)
        self.mean_head = nn.Linear(width, latent_dim)
        self.log_var_head = nn.Linear(width, latent_dim)

    def forward(self, x: torch.Tensor, valid: torch.Tensor) -> DiagonalGaussian:
        """x: (B, T, width) embedded steps; valid: (B, T) bool, False = padding."""
        if x.dim() != 3 or x.shape[-1] != self.width:
            raise ShapeError(f"expected (B, T, {self.width}), got {tuple(x.shape)}")
        if valid.shape != x.shape[:2]:
            raise ShapeError(f"mask shape {tuple(valid.shape)} != {tuple(x.shape[:2])}")
        if (valid.sum(dim=1) == 0).any():
            raise EmptySequenceError("sequence has no valid positions")
        batch = x.shape[0]
        tokens = torch.stack((self.mu_token, self.sigma_token)).unsqueeze(0).expand(batch, -1, -1)
        seq = torch.cat((tokens.to(x.dtype), x), dim=1)
        seq = seq + positional_encoding(seq.shape[1], self.width, x.dtype).to(x.device)
        padding = torch.cat((torch.zeros(batch, 2, dtype=torch.bool, device=x.device), ~valid), dim=1)
        out = self.encoder(seq, src_key_padding_mask=padding)
        return DiagonalGaussian(
            self.mean_head(out[:, 0]), self.log_var_head(out[:, 1]),
            self.log_var_min, self.log_var_max,
        )


class QueryDecoder(nn.Module):

    def __init__(
        self,
        latent_dim: int,
        width: int,
        layers: int,
        heads: int,
        ff: int,
        out_features: int,
        dropout: float = 0.0,
    ):
        super().__init__()
        self.latent_dim = latent_dim
        self.width = width
        self.z_proj = nn.Linear(latent_dim, width)
        layer = nn.TransformerDecoderLayer(
            d_model=width, nhead=heads, dim_feedforward=ff, dropout=dropout,
            activation="gelu", batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(layer, num_layers=layers)
        self.head = nn.Linear(width, out_features)

    def forward(self, z: torch.Tensor, length: int) -> torch.Tensor:
        """(..., D_z) latents -> (..., length, out_features)."""
        if z.shape[-1] != self.latent_dim:
            raise ShapeError(f"z has latent dim {z.shape[-1]}, expected {self.latent_dim}")
        lead = z.shape[:-1]
        flat = z.reshape(-1, self.latent_dim)
        memory = self.z_proj(flat).unsqueeze(1)
        queries = positional_encoding(length, self.width, z.dtype).to(z.device)
        queries = queries.unsqueeze(0).expand(flat.shape[0], -1, -1)
        out = self.head(self.decoder(queries, memory))
        return out.reshape(*lead, length, out.shape[-1])
