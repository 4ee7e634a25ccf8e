"""Tests for diagonal Gaussians: invariants, KL, sampling, densities."""

import math
import os
import sys

import pytest
import torch

PROJECT_ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from internal.distributions.gaussian import (
    DiagonalGaussian, kl_divergence, kl_to_standard_normal, log_prob,
    reparam_sample, standard_normal_like,
)
from internal.models.errors import InvalidDistributionError, ShapeError


def _gauss(mean, log_var) -> DiagonalGaussian:
    return DiagonalGaussian(torch.tensor(mean, dtype=torch.float64), torch.tensor(log_var, dtype=torch.float64))


def test_log_var_is_clamped():
    q = _gauss([0.0, 0.0], [-50.0, 50.0])
    assert q.log_var.tolist() == [-10.0, 10.0]


def test_nan_mean_rejected():
    with pytest.raises(InvalidDistributionError):
        _gauss([float("nan")], [0.0])


def test_shape_mismatch_rejected():
    with pytest.raises(ShapeError):
        DiagonalGaussian(torch.zeros(3), torch.zeros(2))


def test_kl_of_prior_is_zero():
    q = _gauss([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    assert float(kl_to_standard_normal(q)) == 0.0


def test_kl_unit_shift():
    # 0.5 * (1 + 1 - 1 - 0)
    assert float(kl_to_standard_normal(_gauss([1.0], [0.0]))) == pytest.approx(0.5, abs=1e-12)


def test_kl_variance_only():
    expected = 0.5 * (math.e - 1.0 - 1.0)
    assert float(kl_to_standard_normal(_gauss([0.0], [1.0]))) == pytest.approx(expected, abs=1e-12)


def test_kl_divergence_against_prior_matches_closed_form():
    q = _gauss([0.3, -1.2], [0.4, -0.7])
    assert float(kl_divergence(q, standard_normal_like(q))) == pytest.approx(float(kl_to_standard_normal(q)), abs=1e-12)


def test_kl_matches_monte_carlo():
    gen = torch.Generator().manual_seed(0)
    for _ in range(20):
        mean = torch.randn(3, generator=gen, dtype=torch.float64)
        log_var = torch.randn(3, generator=gen, dtype=torch.float64) * 0.5
        q = DiagonalGaussian(mean, log_var)
        z = reparam_sample(q, torch.randn(10 ** 6, 3, generator=gen, dtype=torch.float64))
        prior = standard_normal_like(q)
        estimate = float(torch.mean(log_prob(q, z) - log_prob(prior, z)))
        exact = float(kl_to_standard_normal(q))
        assert abs(estimate - exact) <= 0.01 * exact + 2e-3


def test_reparam_sample_with_sample_axis():
    q = _gauss([[1.0, 2.0]], [[0.0, math.log(4.0)]])
    noise = torch.ones(5, 1, 2, dtype=torch.float64)
    z = reparam_sample(q, noise)
    assert z.shape == (5, 1, 2)
    assert z[0, 0].tolist() == [2.0, 4.0]


def test_reparam_sample_rejects_wrong_noise_shape():
    with pytest.raises(ShapeError):
        reparam_sample(_gauss([0.0, 0.0], [0.0, 0.0]), torch.zeros(3))


def test_reparam_sample_is_differentiable():
    mean = torch.zeros(2, dtype=torch.float64, requires_grad=True)
    log_var = torch.zeros(2, dtype=torch.float64, requires_grad=True)
    z = reparam_sample(DiagonalGaussian(mean, log_var), torch.ones(2, dtype=torch.float64))
    z.sum().backward()
    assert mean.grad.tolist() == [1.0, 1.0]
    assert log_var.grad.tolist() == [0.5, 0.5]


def test_log_prob_standard_normal_at_zero():
    q = _gauss([0.0, 0.0], [0.0, 0.0])
    expected = -math.log(2.0 * math.pi)
    assert float(log_prob(q, torch.zeros(2, dtype=torch.float64))) == pytest.approx(expected, abs=1e-12)


def test_log_prob_rejects_wrong_latent_dim():
    with pytest.raises(ShapeError):
        log_prob(_gauss([0.0, 0.0], [0.0, 0.0]), torch.zeros(3, dtype=torch.float64))


def test_reparam_sample_moments():
    gen = torch.Generator().manual_seed(3)
    q = _gauss([1.5, -0.5, 0.0], [0.0, math.log(0.25), math.log(3.0)])
    z = reparam_sample(q, torch.randn(10 ** 6, 3, generator=gen, dtype=torch.float64))
    mean, var = z.mean(dim=0), z.var(dim=0)
    # the zero-mean coordinate is checked against its std instead
    assert abs(float(mean[0]) - 1.5) <= 0.015
    assert abs(float(mean[1]) + 0.5) <= 0.005
    assert abs(float(mean[2])) <= 0.01 * math.sqrt(3.0)
    assert torch.allclose(var, q.variance, rtol=0.01)


def test_kl_gradient_matches_finite_differences():
    gen = torch.Generator().manual_seed(11)
    mean = torch.randn(2, 4, generator=gen, dtype=torch.float64, requires_grad=True)
    log_var = (torch.randn(2, 4, generator=gen, dtype=torch.float64) * 0.5).requires_grad_()
    assert torch.autograd.gradcheck(
        lambda m, lv: kl_to_standard_normal(DiagonalGaussian(m, lv)), (mean, log_var), eps=1e-5, atol=1e-5,
    )


def test_log_prob_and_kl_match_closed_forms():
    q = _gauss([[0.3, -1.2], [2.0, 0.1]], [[0.4, -0.7], [1.1, -2.0]])
    p = _gauss([[0.1, 0.5], [-1.0, 0.0]], [[-0.3, 0.2], [0.0, 1.5]])
    z = torch.tensor([[0.5, -1.0], [1.0, 1.0]], dtype=torch.float64)
    manual = torch.sum(
        -0.5 * math.log(2 * math.pi) - 0.5 * q.log_var - 0.5 * (z - q.mean) ** 2 / q.variance, dim=-1,
    )
    assert torch.allclose(log_prob(q, z), manual, atol=1e-12)
    manual_kl = 0.5 * torch.sum(
        q.variance / p.variance + (q.mean - p.mean) ** 2 / p.variance - 1.0 - (q.log_var - p.log_var), dim=-1,
    )
    assert torch.allclose(kl_divergence(q, p), manual_kl, atol=1e-12)
