"""Tests for the image, trajectory and text codecs."""

import math
import os
import sys

import pytest
import torch

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from internal.codecs.image import ImageDecoder, ImageEncoder
from internal.codecs.positional import positional_encoding
from internal.codecs.text import TextDecoder, TextEncoder, greedy_tokens
from internal.codecs.trajectory import TrajectoryDecoder, TrajectoryEncoder
from internal.models.errors import (
    ConfigError, EmptySequenceError, ShapeError, VocabularyError,
)

DT = torch.float64
LATENT = 4


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


def _traj_encoder():
    return TrajectoryEncoder(width=8, layers=1, heads=2, ff=16, latent_dim=LATENT).to(DT).eval()


def _text_encoder():
    return TextEncoder(
        vocab_size=13, pad_index=12, l_max=8, embed_dim=2, width=8,
        layers=1, heads=2, ff=16, latent_dim=LATENT,
    ).to(DT).eval()


# ── Positional encoding ──────────────────────────────────────────────────────

def test_positional_encoding_values():
    table = positional_encoding(3, 4, DT)
    assert table.shape == (3, 4)
    assert table[0].tolist() == [0.0, 1.0, 0.0, 1.0]
    assert float(table[1, 0]) == pytest.approx(math.sin(1.0))
    assert float(table[1, 1]) == pytest.approx(math.cos(1.0))
    assert float(table[1, 2]) == pytest.approx(math.sin(0.01))
    assert float(table[2, 3]) == pytest.approx(math.cos(0.02))


def test_positional_encoding_rejects_odd_width():
    with pytest.raises(ConfigError, match="even"):
        positional_encoding(4, 5)


# ── Image ────────────────────────────────────────────────────────────────────

def test_image_encoder_shapes():
    enc = ImageEncoder(16, (4, 4, 4, 4), LATENT).to(DT)
    q = enc(torch.rand(3, 16, 16, 3, dtype=DT))
    assert q.mean.shape == (3, LATENT)
    assert q.log_var.shape == (3, LATENT)


def test_image_encoder_rejects_wrong_size():
    enc = ImageEncoder(16, (4, 4, 4, 4), LATENT)
    with pytest.raises(ShapeError, match="images must be"):
        enc(torch.rand(2, 8, 8, 3))


def test_image_decoder_shapes_and_range():
    dec = ImageDecoder(16, (4, 4, 4, 4), LATENT, hidden=16).to(DT)
    out = dec(torch.randn(5, 2, LATENT, dtype=DT))
    assert out.shape == (5, 2, 16, 16, 3)
    assert float(out.min()) >= 0.0 and float(out.max()) <= 1.0


def test_image_decoder_rejects_bad_size():
    with pytest.raises(ShapeError):
        ImageDecoder(12, (4, 4, 4, 4), LATENT, hidden=16)


def test_image_encoder_gradcheck():
    enc = ImageEncoder(8, (2, 2, 2, 2), 2).to(DT)
    x = torch.rand(1, 8, 8, 3, dtype=DT, requires_grad=True)
    assert torch.autograd.gradcheck(lambda t: enc(t).mean, (x,))


# ── Trajectory ───────────────────────────────────────────────────────────────

def test_trajectory_encoder_shapes():
    q = _traj_encoder()(torch.randn(2, 10, 4, dtype=DT), torch.ones(2, 10, dtype=torch.bool))
    assert q.mean.shape == (2, LATENT)


def test_trajectory_encoder_ignores_padding():
    enc = _traj_encoder()
    steps = torch.randn(1, 10, 4, dtype=DT)
    mask = torch.zeros(1, 10, dtype=torch.bool)
    mask[:, :6] = True
    altered = steps.clone()
    altered[:, 6:] = 100.0
    a, b = enc(steps, mask), enc(altered, mask)
    assert torch.allclose(a.mean, b.mean, atol=1e-10)
    assert torch.allclose(a.log_var, b.log_var, atol=1e-10)


def test_trajectory_encoder_is_order_sensitive():
    enc = _traj_encoder()
    steps = torch.randn(1, 6, 4, dtype=DT)
    mask = torch.ones(1, 6, dtype=torch.bool)
    a = enc(steps, mask)
    b = enc(torch.flip(steps, dims=[1]), mask)
    assert not torch.allclose(a.mean, b.mean, atol=1e-8)


def test_trajectory_encoder_rejects_empty_sequence():
    with pytest.raises(EmptySequenceError):
        _traj_encoder()(torch.randn(1, 5, 4, dtype=DT), torch.zeros(1, 5, dtype=torch.bool))


def test_trajectory_encoder_rejects_wrong_features():
    with pytest.raises(ShapeError):
        _traj_encoder()(torch.randn(1, 5, 3, dtype=DT), torch.ones(1, 5, dtype=torch.bool))


def test_trajectory_decoder_any_length():
    dec = TrajectoryDecoder(LATENT, 8, 1, 2, 16, t_max=20).to(DT)
    z = torch.randn(3, 2, LATENT, dtype=DT)
    for length in (1, 7, 20):
        out = dec(z, length)
        assert out.shape == (3, 2, length, 4)
        grip = out[..., 3]
        assert float(grip.min()) >= 0.0 and float(grip.max()) <= 1.0


def test_trajectory_decoder_rejects_bad_length():
    dec = TrajectoryDecoder(LATENT, 8, 1, 2, 16, t_max=20)
    with pytest.raises(ConfigError, match="trajectory length"):
        dec(torch.randn(1, LATENT), 21)
    with pytest.raises(ConfigError):
        dec(torch.randn(1, LATENT), 0)


def test_trajectory_decoder_gradcheck():
    dec = TrajectoryDecoder(2, 4, 1, 2, 8, t_max=5).to(DT)
    z = torch.randn(1, 2, dtype=DT, requires_grad=True)
    assert torch.autograd.gradcheck(lambda t: dec(t, 3), (z,))


# ── Text ─────────────────────────────────────────────────────────────────────

def test_text_encoder_ignores_pad_positions():
    enc = _text_encoder()
    short = torch.tensor([[9, 5, 6, 12, 12, 12, 12, 12]])
    q_padded = enc(short)
    q_trimmed = enc(short[:, :3])
    assert torch.allclose(q_padded.mean, q_trimmed.mean, atol=1e-10)


def test_text_encoder_rejects_out_of_vocabulary():
    with pytest.raises(VocabularyError):
        _text_encoder()(torch.tensor([[0, 13]]))


def test_text_encoder_rejects_long_sequences():
    with pytest.raises(ShapeError):
        _text_encoder()(torch.zeros(1, 9, dtype=torch.long))


def test_text_encoder_rejects_all_pad():
    with pytest.raises(EmptySequenceError):
        _text_encoder()(torch.full((1, 4), 12))


def test_text_decoder_logits_and_greedy():
    dec = TextDecoder(LATENT, 13, l_max=8, width=8, layers=1, heads=2, ff=16).to(DT)
    logits = dec(torch.randn(2, LATENT, dtype=DT), 8)
    assert logits.shape == (2, 8, 13)
    tokens = greedy_tokens(logits)
    assert tokens.shape == (2, 8)
    assert int(tokens.max()) < 13


def test_text_decoder_rejects_bad_length():
    dec = TextDecoder(LATENT, 13, l_max=8, width=8, layers=1, heads=2, ff=16)
    with pytest.raises(ConfigError, match="text length"):
        dec(torch.randn(1, LATENT), 9)
