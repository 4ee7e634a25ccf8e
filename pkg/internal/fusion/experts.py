"""Joint-posterior construction over per-modality Gaussian experts.

Three fusion rules:
  - product_of_experts   precision-weighted product (MVAE), optional prior expert
  - mixture_components   uniform mixture of the unimodal experts (MMVAE)
  - mopoe_components     uniform mixture over the powerset of experts, each
                         subset fused by a product (MoPoE)

Mixtures are sampled with an explicit component schedule so that sampling is
deterministic given the noise; stratified_choices cycles through components.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import torch

from internal.distributions.gaussian import (
    DiagonalGaussian, standard_normal_like, reparam_sample, log_prob,
)
from internal.models.errors import ShapeError, ConfigError

VALID_KINDS = ("poe", "moe", "mopoe")
_WEIGHT_TOLERANCE = 1e-9


@dataclass
class ExpertSet:
    """Posterior experts of the modalities that are present, in modality order."""
    experts: list
    present_mask: tuple

    def __post_init__(self):
        if not self.experts:
            raise ShapeError("an ExpertSet needs at least one expert")
        if sum(bool(m) for m in self.present_mask) != len(self.experts):
            raise ShapeError(
                f"present_mask {self.present_mask} does not match {len(self.experts)} experts"
            )
        shape = self.experts[0].mean.shape
        for expert in self.experts[1:]:
            if expert.mean.shape != shape:
                raise ShapeError(
                    f"experts disagree on shape: {tuple(expert.mean.shape)} vs {tuple(shape)}"
                )

    def __len__(self) -> int:
        return len(self.experts)

    def subset(self, indices) -> "ExpertSet":
        """Experts at the given positions (indices into `experts`)."""
        chosen = sorted(set(indices))
        slots = [slot for slot, present in enumerate(self.present_mask) if present]
        chosen_slots = {slots[i] for i in chosen}
        mask = tuple(slot in chosen_slots for slot in range(len(self.present_mask)))
        return ExpertSet([self.experts[i] for i in chosen], mask)


@dataclass
class JointPosterior:
    """Weighted list of Gaussian components.

    `subsets[c]` records which experts (indices into the ExpertSet) were fused
    into component c; the empty tuple marks the prior.
    """
    components: list
    kind: str
    subsets: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ConfigError(f"kind must be one of {VALID_KINDS}")
        if not self.components:
            raise ShapeError("a JointPosterior needs at least one component")
        total = sum(w for w, _ in self.components)
        if abs(total - 1.0) > _WEIGHT_TOLERANCE:
            raise ValueError(f"component weights sum to {total}, expected 1")
        if self.kind == "poe" and (len(self.components) != 1 or self.components[0][0] != 1.0):
            raise ValueError("a poe posterior has exactly one component with weight 1")
        if not self.subsets:
            self.subsets = [() for _ in self.components]

    @property
    def weights(self) -> list:
        return [w for w, _ in self.components]

    @property
    def dists(self) -> list:
        return [d for _, d in self.components]

    def __len__(self) -> int:
        return len(self.components)

    def filter(self, keep: Callable[[tuple], bool]) -> "JointPosterior":
        """Keep components whose subset satisfies `keep`; renormalize weights."""
        picked = [(w, d, s) for (w, d), s in zip(self.components, self.subsets) if keep(s)]
        if not picked:
            raise ValueError("filter removed every component")
        total = sum(w for w, _, _ in picked)
        return JointPosterior(
            components=[(w / total, d) for w, d, _ in picked],
            kind=self.kind,
            subsets=[s for _, _, s in picked],
        )

    def mean(self) -> torch.Tensor:
        """Mean of the mixture density."""
        return sum(w * d.mean for w, d in self.components)

    def log_prob(self, z: torch.Tensor) -> torch.Tensor:
        """log sum_c w_c N(z; mu_c, var_c), summed over the latent axis."""
        terms = torch.stack(
            [math.log(w) + log_prob(d, z) for w, d in self.components], dim=0,
        )
        return torch.logsumexp(terms, dim=0)

    def detach(self) -> "JointPosterior":
        return JointPosterior(
            [(w, d.detach()) for w, d in self.components], self.kind, list(self.subsets),
        )


# ── Fusion rules ─────────────────────────────────────────────────────────────

def product_of_experts(e: ExpertSet, include_prior: bool = True) -> DiagonalGaussian:
    """Product of Gaussian experts, computed in precision space.

    precision T = sum_n exp(-log_var_n) (+1 for the unit-precision prior),
    mean = sum_n mu_n T_n / T; the result's log_var is re-clamped.
    """
    first = e.experts[0]
    precision = torch.zeros_like(first.mean)
    weighted_mean = torch.zeros_like(first.mean)
    if include_prior:
        precision = precision + 1.0
    for expert in e.experts:
        t = torch.exp(-expert.log_var)
        precision = precision + t
        weighted_mean = weighted_mean + expert.mean * t
    return DiagonalGaussian(
        weighted_mean / precision, -torch.log(precision), first.log_var_min, first.log_var_max,
    )


def poe_posterior(e: ExpertSet, include_prior: bool = True) -> JointPosterior:
    return JointPosterior(
        [(1.0, product_of_experts(e, include_prior))], "poe", [tuple(range(len(e)))],
    )


def mixture_components(e: ExpertSet) -> JointPosterior:
    """Uniform mixture of the present experts, each unchanged."""
    m = len(e)
    return JointPosterior(
        [(1.0 / m, expert) for expert in e.experts], "moe", [(i,) for i in range(m)],
    )


def powerset_indices(m: int, include_empty: bool) -> list:
    """Subsets of range(m) in binary-counting order."""
    start = 0 if include_empty else 1
    return [
        tuple(i for i in range(m) if code >> i & 1)
        for code in range(start, 2 ** m)
    ]


def mopoe_components(
    e: ExpertSet,
    include_empty_subset: bool = True,
    subset_sizes: Optional[tuple] = None,
) -> JointPosterior:
    """Uniform mixture over the powerset of present experts.

    Each subset is fused by product_of_experts without the prior expert; the
    empty subset, when included, contributes the standard-normal prior.
    `subset_sizes` optionally restricts the mixture to subsets of those sizes.
    """
    subsets = powerset_indices(len(e), include_empty_subset)
    if subset_sizes is not None:
        subsets = [s for s in subsets if len(s) in subset_sizes]
    if not subsets:
        raise ConfigError(f"no subsets of {len(e)} experts have sizes {subset_sizes}")
    weight = 1.0 / len(subsets)
    components = []
    for subset in subsets:
        if subset:
            dist = product_of_experts(ExpertSet(
                [e.experts[i] for i in subset], tuple(True for _ in subset),
            ), include_prior=False)
        else:
            dist = standard_normal_like(e.experts[0])
        components.append((weight, dist))
    return JointPosterior(components, "mopoe", subsets)


# ── Sampling ─────────────────────────────────────────────────────────────────

def stratified_choices(k: int, n_components: int) -> list:
    """Cycle through components: [0, 1, ..., C-1, 0, 1, ...] of length k."""
    if n_components < 1:
        raise ValueError("n_components must be >= 1")
    return [i % n_components for i in range(k)]


def sample_mixture(
    jp: JointPosterior,
    k: int,
    noise: torch.Tensor,
    component_choices: list,
) -> tuple:
    """Draw k reparameterized samples, sample i from component_choices[i].

    noise has shape (k, *batch, D_z). Returns (z of the same shape, choices).
    """
    if len(component_choices) != k:
        raise ShapeError(f"{len(component_choices)} component choices for {k} samples")
    if noise.shape[0] != k:
        raise ShapeError(f"noise has {noise.shape[0]} samples, expected {k}")
    for c in component_choices:
        if c < 0 or c >= len(jp):
            raise IndexError(f"component index {c} out of range for {len(jp)} components")
    if k == 0:
        return noise.clone(), []
    samples = [reparam_sample(jp.components[c][1], noise[i]) for i, c in enumerate(component_choices)]
    return torch.stack(samples, dim=0), list(component_choices)
