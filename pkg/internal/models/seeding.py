"""Purpose-namespaced seed derivation.

Every random stream is derived from a single user seed plus a purpose string
("train", "eval:17", "fixed/reach:trial:3", ...). The hash keeps streams for
different purposes independent, so test scenes never share seeds with
training scenes.
"""

import hashlib

import numpy as np
import torch


def derive_seed(seed: int, purpose: str) -> int:
    """Deterministically map (seed, purpose) to a 63-bit seed."""
    digest = hashlib.sha256(f"{seed}:{purpose}".encode()).hexdigest()
    return int(digest[:16], 16) & 0x7FFFFFFFFFFFFFFF


def numpy_rng(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, purpose))


def torch_generator(seed: int, purpose: str) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(derive_seed(seed, purpose))
    return gen
