"""Modality-subset schedules for training with missing modalities."""

from itertools import combinations
from typing import Optional

import numpy as np

from internal.models.errors import ConfigError

VALID_STRATEGIES = ("full_only", "mvae_standard")


def subset_schedule(
    n_present: int,
    strategy: str,
    rng: Optional[np.random.Generator] = None,
) -> list:
    """Expert-index subsets to evaluate the ELBO on in one step.

    full_only:      [all]
    mvae_standard:  [all] + each singleton + one random proper subset of size
                    >= 2 (only when n_present >= 3), duplicates removed.
    """
    if n_present < 1:
        raise ConfigError("n_present must be >= 1")
    if strategy not in VALID_STRATEGIES:
        raise ConfigError(f"subset strategy must be one of {VALID_STRATEGIES}, got '{strategy}'")

    full = tuple(range(n_present))
    if strategy == "full_only":
        return [full]

    schedule = [full] + [(i,) for i in range(n_present)]
    if n_present >= 3:
        if rng is None:
            raise ConfigError("mvae_standard with 3+ modalities needs an rng")
        proper = [
            combo
            for size in range(2, n_present)
            for combo in combinations(range(n_present), size)
        ]
        schedule.append(proper[int(rng.integers(len(proper)))])

    deduped = []
    for subset in schedule:
        if subset not in deduped:
            deduped.append(subset)
    return deduped
