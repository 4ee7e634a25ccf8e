"""Image codec: strided convolutional encoder, fully-connected + transposed
convolution decoder.

Images are channels-last (B, H, W, 3) with values in [0, 1], matching the
dataset blobs; the modules permute to channels-first internally.
"""

import torch
from torch import nn

from internal.distributions.gaussian import DiagonalGaussian, LOG_VAR_MIN, LOG_VAR_MAX
from internal.models.errors import ShapeError


def _halve(size: int) -> int:
    # Conv2d(kernel=3, stride=2, padding=1)
    return (size - 1) // 2 + 1


class ImageEncoder(nn.Module):
    """4 strided convolution blocks followed by parallel mean / log-variance heads."""

    def __init__(
        self,
        image_size: int,
        channels: tuple,
        latent_dim: int,
        log_var_min: float = LOG_VAR_MIN,
        log_var_max: float = LOG_VAR_MAX,
    ):
        super().__init__()
        self.image_size = image_size
        self.log_var_min = log_var_min
        self.log_var_max = log_var_max
        blocks = []
        in_ch = 3
        spatial = image_size
        for out_ch in channels:
            blocks += [nn.Conv2d(in_ch, out_ch, kernel_size=3, stride=2, padding=1), nn.SiLU()]
            in_ch = out_ch
            spatial = _halve(spatial)
        self.features = nn.Sequential(*blocks, nn.Flatten())
        flat = in_ch * spatial * spatial
        self.mean_head = nn.Linear(flat, latent_dim)
        self.log_var_head = nn.Linear(flat, latent_dim)

    def forward(self, images: torch.Tensor) -> DiagonalGaussian:
        expected = (self.image_size, self.image_size, 3)
        if images.dim() != 4 or tuple(images.shape[1:]) != expected:
            raise ShapeError(f"images must be (B, {expected[0]}, {expected[1]}, 3), got {tuple(images.shape)}")
        h = self.features(images.permute(0, 3, 1, 2))
        return DiagonalGaussian(
            self.mean_head(h), self.log_var_head(h), self.log_var_min, self.log_var_max,
        )


class ImageDecoder(nn.Module):
    """3 fully-connected layers, then 3 transposed convolutions up to H x W x 3."""

    def __init__(self, image_size: int, channels: tuple, latent_dim: int, hidden: int):
        super().__init__()
        if image_size % 8 != 0:
            raise ShapeError(f"image_size must be a multiple of 8, got {image_size}")
        self.image_size = image_size
        self.latent_dim = latent_dim
        self.base = image_size // 8
        self.base_channels = channels[-1]
        self.fc = nn.Sequential(
            nn.Linear(latent_dim, hidden), nn.SiLU(),
            nn.Linear(hidden, hidden), nn.SiLU(),
            nn.Linear(hidden, self.base_channels * self.base * self.base), nn.SiLU(),
        )
        mid = channels[-2]
        low = channels[0]
        self.deconv = nn.Sequential(
            nn.ConvTranspose2d(self.base_channels, mid, kernel_size=4, stride=2, padding=1), nn.SiLU(),
            nn.ConvTranspose2d(mid, low, kernel_size=4, stride=2, padding=1), nn.SiLU(),
            nn.ConvTranspose2d(low, 3, kernel_size=4, stride=2, padding=1),
        )

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        """Mean image for each latent; leading sample axes are preserved."""
        if z.shape[-1] != self.latent_dim:
            raise ShapeError(f"z has latent dim {z.shape[-1]}, expected {self.latent_dim}")
        lead = z.shape[:-1]
        h = self.fc(z.reshape(-1, self.latent_dim))
        h = h.view(-1, self.base_channels, self.base, self.base)
        pixels = torch.sigmoid(self.deconv(h)).permute(0, 2, 3, 1)
        return pixels.reshape(*lead, self.image_size, self.image_size, 3)
