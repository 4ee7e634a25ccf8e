"""Deterministic cross-modal inference.

The present modalities are encoded, fused, and the fused posterior MEAN is
decoded; nothing is sampled. inference_fusion selects the fusion:
  poe                precision-weighted product of the present experts (with
                     the prior expert for MVAE when include_prior is set, without
                     it for the mixture models)
  component_average  the model's own joint posterior; each component mean is
                     decoded and the outputs are averaged with component weights
"""

import logging
from typing import Optional

import numpy as np
import torch

from internal.fusion.experts import ExpertSet, product_of_experts
from internal.models.errors import ConfigError, MMVAEError
from internal.models.types import MODALITIES

logger = logging.getLogger(__name__)


def _as_batch(array, dtype) -> torch.Tensor:
    return torch.as_tensor(np.asarray(array)).to(dtype).unsqueeze(0)


def _encode_present(model, image=None, tokens=None, trajectory=None, mask=None) -> ExpertSet:
    c = model.config
    dtype = c.torch_dtype
    experts = {}
    try:
        if image is not None:
            experts["image"] = model.encoders["image"](_as_batch(image, dtype))
        if tokens is not None:
            experts["text"] = model.encoders["text"](torch.as_tensor(np.asarray(tokens)).long().unsqueeze(0))
        if trajectory is not None:
            steps = _as_batch(trajectory, dtype)
            valid = torch.ones(steps.shape[:2], dtype=torch.bool) if mask is None else _as_batch(mask, torch.bool)
            experts["trajectory"] = model.encoders["trajectory"](steps, valid)
    except MMVAEError as e:
        raise ConfigError(f"inputs incompatible with the model: {e}")
    ordered = [m for m in MODALITIES if m in experts]
    return ExpertSet([experts[m] for m in ordered], tuple(m in experts for m in MODALITIES))


def _decode_fused(model, experts: ExpertSet, modality: str, length: int) -> torch.Tensor:
    c = model.config
    decoder = model.decoders[modality]
    if c.inference_fusion == "poe":
        include_prior = c.include_prior if c.model_kind == "mvae" else False
        z = product_of_experts(experts, include_prior).mean
        return decoder(z, length)[0]
    jp = model.joint_posterior(experts)
    outputs = [w * decoder(d.mean, length)[0] for w, d in jp.components]
    return sum(outputs)


def infer_trajectory(model, image, tokens, length: int) -> np.ndarray:
    """(length, 4) trajectory from an image and an instruction."""
    c = model.config
    if not 1 <= length <= c.t_max:
        raise ConfigError(f"trajectory length must be in [1, {c.t_max}], got {length}")
    model.eval()
    with torch.no_grad():
        experts = _encode_present(model, image=image, tokens=tokens)
        traj = _decode_fused(model, experts, "trajectory", length)
    return traj.cpu().numpy().astype(np.float64)


def infer_caption(model, image, trajectory, mask: Optional[np.ndarray] = None) -> np.ndarray:
    """(l_max,) greedy token indices from an image and a trajectory."""
    c = model.config
    model.eval()
    with torch.no_grad():
        experts = _encode_present(model, image=image, trajectory=trajectory, mask=mask)
        logits = _decode_fused(model, experts, "text", c.l_max)
    return torch.argmax(logits, dim=-1).cpu().numpy()
