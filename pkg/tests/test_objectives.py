"""Tests for reconstruction losses, the multimodal ELBO and IWAE with DReG."""

import math
import os
import sys

import pytest
import torch

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from internal.models.errors import ConfigError, EmptySequenceError, ShapeError
from internal.models.types import Batch, ModelConfig
from internal.objectives.elbo import multimodal_elbo
from internal.objectives.iwae import importance_bound, iwae_dreg
from internal.objectives.recon import (
    categorical_recon, gaussian_nll, modality_nll, mse_recon, sigma_vae_recon,
)
from internal.trainer.model import MultimodalVAE

DT = torch.float64


def _tiny_config(**overrides) -> ModelConfig:
    values = dict(
        image_size=8, image_channels=(4, 4, 4, 4), image_hidden=16, latent_dim=4,
        traj_width=8, traj_layers=1, traj_heads=2, traj_ff=16,
        text_width=8, text_heads=2, text_ff=16, iwae_k=3, dtype="float64",
    )
    values.update(overrides)
    return ModelConfig(**values)


def _model(seed=0, **overrides) -> MultimodalVAE:
    torch.manual_seed(seed)
    return MultimodalVAE(_tiny_config(**overrides))


def _batch(seed=0, size=4, length=6) -> Batch:
    gen = torch.Generator().manual_seed(seed)
    tokens = torch.full((size, 8), 12, dtype=torch.long)
    tokens[:, 0] = 0
    tokens[:, 1] = 5
    tokens[:, 2] = torch.randint(6, 9, (size,), generator=gen)
    mask = torch.ones(size, length, dtype=torch.bool)
    mask[0, length - 2:] = False
    return Batch(
        images=torch.rand(size, 8, 8, 3, generator=gen, dtype=DT),
        tokens=tokens,
        trajectory=torch.rand(size, length, 4, generator=gen, dtype=DT) * 0.2,
        trajectory_mask=mask,
    )


def _gen(seed: int) -> torch.Generator:
    return torch.Generator().manual_seed(seed)


# ── Reconstruction ───────────────────────────────────────────────────────────

def test_mse_examples():
    assert float(mse_recon(torch.tensor([1.0, 2.0]), torch.zeros(2))) == pytest.approx(2.5)
    assert float(mse_recon(torch.tensor([1.0, 2.0, 3.0]), torch.zeros(3))) == pytest.approx(14 / 3)
    x = torch.randn(5)
    assert float(mse_recon(x, x)) == 0.0


def test_mse_rejects_shape_mismatch():
    with pytest.raises(ShapeError):
        mse_recon(torch.zeros(2), torch.zeros(3))


def test_sigma_vae_examples():
    loss = sigma_vae_recon(torch.tensor([1.0, 2.0], dtype=DT), torch.zeros(2, dtype=DT), 1e-6)
    assert float(loss) == pytest.approx(math.log(2 * math.pi * 2.5) + 1, abs=1e-9)
    assert float(loss) == pytest.approx(3.75551, abs=1e-5)
    single = sigma_vae_recon(torch.tensor([3.0], dtype=DT), torch.tensor([1.0], dtype=DT), 1e-6)
    assert float(single) == pytest.approx(2.11209, abs=1e-5)


def test_sigma_vae_clamps_at_zero_error():
    x = torch.randn(6, dtype=DT)
    loss = sigma_vae_recon(x, x.clone(), 1e-4)
    assert float(loss) == pytest.approx(3 * math.log(2 * math.pi * 1e-4), abs=1e-9)


def test_sigma_vae_is_minimum_over_variances():
    x = torch.tensor([1.0, 2.0], dtype=DT)
    mu = torch.zeros(2, dtype=DT)
    best = float(sigma_vae_recon(x, mu, 1e-6))
    for var in (1.25, 5.0):
        assert best < float(gaussian_nll(x, mu, var))
    assert best == pytest.approx(float(gaussian_nll(x, mu, 2.5)), abs=1e-12)


def test_sigma_vae_optimal_against_scaled_variances():
    gen = _gen(3)
    for _ in range(100):
        x = torch.randn(20, generator=gen, dtype=DT)
        mu = torch.randn(20, generator=gen, dtype=DT)
        loss = float(sigma_vae_recon(x, mu, 1e-6))
        var_star = float(torch.mean((x - mu) ** 2))
        assert loss == pytest.approx(float(gaussian_nll(x, mu, var_star)), abs=1e-9)
        for c in (0.25, 0.5, 2.0, 4.0):
            assert loss < float(gaussian_nll(x, mu, c * var_star))


def test_sigma_vae_and_mse_gradients_are_parallel():
    gen = _gen(4)
    x = torch.randn(30, generator=gen, dtype=DT)
    mu = torch.randn(30, generator=gen, dtype=DT, requires_grad=True)
    (g_mse,) = torch.autograd.grad(mse_recon(x, mu), mu)
    (g_sigma,) = torch.autograd.grad(sigma_vae_recon(x, mu, 1e-6), mu)
    cosine = torch.dot(g_mse, g_sigma) / (g_mse.norm() * g_sigma.norm())
    assert abs(float(cosine) - 1.0) < 1e-9


def test_sigma_vae_respects_mask():
    x = torch.tensor([[1.0, 2.0, 50.0]], dtype=DT)
    mask = torch.tensor([[True, True, False]])
    masked = sigma_vae_recon(x, torch.zeros_like(x), 1e-6, mask)
    plain = sigma_vae_recon(x[:, :2], torch.zeros(1, 2, dtype=DT), 1e-6)
    assert float(masked) == pytest.approx(float(plain), abs=1e-12)


def test_sigma_vae_rejects_nonpositive_floor():
    with pytest.raises(ConfigError):
        sigma_vae_recon(torch.zeros(2), torch.zeros(2), 0.0)


def test_categorical_examples():
    uniform = categorical_recon(torch.zeros(3, 4), torch.tensor([0, 1, 3]), torch.zeros(3, dtype=torch.bool))
    assert float(uniform) == pytest.approx(math.log(4), abs=1e-6)
    pair = categorical_recon(torch.tensor([[1.0, 0.0]]), torch.tensor([0]), torch.tensor([False]))
    assert float(pair) == pytest.approx(0.31326, abs=1e-5)


def test_categorical_margin_drives_loss_to_zero():
    logits = torch.tensor([[100.0, 0.0, 0.0]])
    assert float(categorical_recon(logits, torch.tensor([0]), torch.tensor([False]))) < 1e-30


def test_categorical_skips_masked_positions():
    logits = torch.tensor([[1.0, 0.0], [0.0, 50.0]])
    loss = categorical_recon(logits, torch.tensor([0, 0]), torch.tensor([False, True]))
    assert float(loss) == pytest.approx(0.31326, abs=1e-5)


def test_categorical_all_masked():
    with pytest.raises(EmptySequenceError):
        categorical_recon(torch.zeros(2, 3), torch.tensor([0, 1]), torch.ones(2, dtype=torch.bool))


def test_modality_nll_skips_padding():
    batch = _batch()
    cfg = _tiny_config(recon_trajectory="mse")
    decoded = {
        "trajectory": batch.trajectory.clone(),
        "text": torch.zeros(batch.size, 8, 13, dtype=DT),
    }
    decoded["trajectory"][0, -2:] = 9.0
    nll = modality_nll(batch, decoded, cfg.recon_kinds, cfg.sigma_min_sq, cfg.pad_index)
    assert torch.allclose(nll["trajectory"], torch.zeros(batch.size, dtype=DT))
    assert torch.allclose(nll["text"], torch.full((batch.size,), 3 * math.log(13), dtype=DT))


# ── ELBO ─────────────────────────────────────────────────────────────────────

def test_elbo_beta_zero_is_pure_reconstruction():
    model, batch = _model(), _batch()
    out = multimodal_elbo(batch, model, "poe", [(0, 1, 2)], 0.0, model.config.recon_kinds, _gen(1))
    assert out.objective_kind == "elbo"
    assert float(out.kl) > 0.0
    recon = sum(out.per_modality_recon.values())
    assert float(out.total) == pytest.approx(float(recon), abs=1e-9)


def test_elbo_total_is_recon_plus_beta_kl():
    model, batch = _model(), _batch()
    out = multimodal_elbo(batch, model, "poe", [(0, 1, 2)], 2.0, model.config.recon_kinds, _gen(1))
    recon = sum(out.per_modality_recon.values())
    assert float(out.total) == pytest.approx(float(recon + 2.0 * out.kl), abs=1e-9)
    assert math.isfinite(float(out.total))


def test_elbo_poe_matches_mopoe_full_subset():
    model, batch = _model(), _batch()
    kinds = model.config.recon_kinds
    poe = multimodal_elbo(batch, model, "poe", [(0, 1, 2)], 1.0, kinds, _gen(7), include_prior=False)
    mopoe = multimodal_elbo(batch, model, "mopoe", [(0, 1, 2)], 1.0, kinds, _gen(7), subset_sizes=(3,))
    assert float(poe.total) == pytest.approx(float(mopoe.total), abs=1e-6)
    assert float(poe.kl) == pytest.approx(float(mopoe.kl), abs=1e-6)


def test_elbo_mopoe_runs_over_the_powerset():
    model, batch = _model(model_kind="mopoe"), _batch()
    out = multimodal_elbo(batch, model, "mopoe", [(0, 1, 2)], 1.0, model.config.recon_kinds, _gen(2))
    assert math.isfinite(float(out.total))
    assert float(out.kl) >= 0.0


def test_elbo_averages_over_schedule():
    model, batch = _model(), _batch()
    kinds = model.config.recon_kinds
    out = multimodal_elbo(batch, model, "poe", [(0, 1, 2), (0,), (1,), (2,)], 1.0, kinds, _gen(5))
    assert math.isfinite(float(out.total))
    assert set(out.per_modality_recon) == {"image", "text", "trajectory"}


def test_elbo_rejects_bad_arguments():
    model, batch = _model(), _batch()
    kinds = model.config.recon_kinds
    with pytest.raises(ConfigError, match="empty"):
        multimodal_elbo(batch, model, "poe", [], 1.0, kinds, _gen(0))
    with pytest.raises(ConfigError, match="fusion_kind"):
        multimodal_elbo(batch, model, "moe", [(0,)], 1.0, kinds, _gen(0))
    with pytest.raises(ConfigError, match="kl_mode"):
        multimodal_elbo(batch, model, "poe", [(0,)], 1.0, kinds, _gen(0), kl_mode="exact")


def test_elbo_decreases_under_training():
    model = _model(recon_image="mse", recon_trajectory="mse")
    batch = _batch(size=8)
    optimizer = torch.optim.Adam(model.parameters(), lr=1e-3)
    losses = []
    for _ in range(200):
        out = multimodal_elbo(
            batch, model, "poe", [(0,)], 1.0, model.config.recon_kinds, _gen(0),
            present=("trajectory",),
        )
        optimizer.zero_grad()
        out.backward_target().backward()
        optimizer.step()
        losses.append(float(out.total))
    assert sum(losses[-20:]) / 20 < sum(losses[:20]) / 20
    assert losses[-1] < losses[0]


def test_composite_gradient_matches_finite_differences():
    model = _model(recon_image="mse", recon_trajectory="mse")
    base = _batch(size=2)

    def loss_of(trajectory):
        batch = Batch(base.images, base.tokens, trajectory, base.trajectory_mask)
        out = multimodal_elbo(batch, model, "poe", [(0, 1, 2)], 1.0, model.config.recon_kinds, _gen(9))
        return out.total

    traj = base.trajectory.clone().requires_grad_(True)
    assert torch.autograd.gradcheck(loss_of, (traj,), eps=1e-6, atol=1e-6, rtol=1e-3)


# ── IWAE / DReG ──────────────────────────────────────────────────────────────

def test_importance_bound_of_equal_weights():
    log_w = torch.full((5, 3), -2.5, dtype=DT)
    assert torch.allclose(importance_bound(log_w), torch.full((3,), -2.5, dtype=DT), atol=1e-12)


def test_iwae_single_sample_equals_elbo():
    model, batch = _model(), _batch()
    kinds = model.config.recon_kinds
    iwae = iwae_dreg(batch, model, 1, 1.0, kinds, _gen(11), present=("trajectory",))
    elbo = multimodal_elbo(
        batch, model, "poe", [(0,)], 1.0, kinds, _gen(11), kl_mode="monte_carlo",
        present=("trajectory",), include_prior=False,
    )
    assert iwae.objective_kind == "iwae_dreg"
    assert abs(float(iwae.total) - float(elbo.total)) < 1e-9


def test_iwae_more_samples_tighten_the_bound():
    model = _model(recon_image="mse", recon_trajectory="mse")
    kinds = model.config.recon_kinds
    k1, k5 = [], []
    with torch.no_grad():
        for seed in range(100):
            batch = _batch(seed=seed, size=2)
            k1.append(float(iwae_dreg(batch, model, 1, 1.0, kinds, _gen(seed)).total))
            k5.append(float(iwae_dreg(batch, model, 5, 1.0, kinds, _gen(seed)).total))
    assert sum(k5) / len(k5) <= sum(k1) / len(k1)


def test_iwae_rejects_zero_samples():
    model, batch = _model(), _batch()
    with pytest.raises(ConfigError, match="K must be"):
        iwae_dreg(batch, model, 0, 1.0, model.config.recon_kinds, _gen(0))


def test_dreg_surrogate_gives_decoders_the_bound_gradient():
    model, batch = _model(model_kind="mmvae"), _batch()
    kinds = model.config.recon_kinds
    params = list(model.decoders.parameters())
    out = iwae_dreg(batch, model, 4, 1.0, kinds, _gen(21))
    surrogate_grads = torch.autograd.grad(out.surrogate, params, allow_unused=True)
    out = iwae_dreg(batch, model, 4, 1.0, kinds, _gen(21))
    total_grads = torch.autograd.grad(out.total, params, allow_unused=True)
    for a, b in zip(surrogate_grads, total_grads):
        if a is None or b is None:
            assert a is None and b is None
            continue
        assert torch.allclose(a, b, atol=1e-9)


def test_dreg_encoder_gradients_are_finite():
    model, batch = _model(model_kind="mmvae"), _batch()
    out = iwae_dreg(batch, model, 3, 1.0, model.config.recon_kinds, _gen(5))
    out.backward_target().backward()
    grads = [p.grad for p in model.encoders.parameters() if p.grad is not None]
    assert grads
    assert all(torch.isfinite(g).all() for g in grads)


@pytest.mark.parametrize("k", [1, 2])
def test_every_encoder_gets_gradient_at_small_k(k):
    model, batch = _model(model_kind="mmvae"), _batch()
    out = iwae_dreg(batch, model, k, 1.0, model.config.recon_kinds, _gen(8))
    out.backward_target().backward()
    for name, encoder in model.encoders.items():
        grads = [p.grad for p in encoder.parameters() if p.grad is not None]
        assert grads, f"{name} encoder received no gradient"
        assert sum(float(g.abs().sum()) for g in grads) > 0.0
