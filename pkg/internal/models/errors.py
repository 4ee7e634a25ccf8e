"""Exception hierarchy for the multimodal VAE toolkit.

Usage/config problems derive from ValueError and map to CLI exit code 2.
Runtime failures (generation, corrupt files, diverged training) derive from
RuntimeError and map to exit code 1.
"""

from typing import Optional


class MMVAEError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(MMVAEError, ValueError):
    """Invalid configuration, flag value, or incompatible inputs."""


class ShapeError(MMVAEError, ValueError):
    """Tensor shapes do not agree with the operation's contract."""


class InvalidDistributionError(MMVAEError, ValueError):
    """A distribution parameter is NaN or infinite."""


class EmptySequenceError(MMVAEError, ValueError):
    """A sequence has no valid (unmasked) positions."""


class VocabularyError(MMVAEError, ValueError):
    """A token index lies outside the vocabulary."""


class InvalidTrajectoryError(MMVAEError, ValueError):
    """A trajectory contains NaN or has the wrong layout."""


class GenerationError(MMVAEError, RuntimeError):
    """Scene or demonstration generation failed for one trial."""

    def __init__(self, message: str, trial_index: Optional[int] = None):
        if trial_index is not None:
            message = f"trial {trial_index}: {message}"
        super().__init__(message)
        self.trial_index = trial_index


class IntegrityError(MMVAEError, RuntimeError):
    """A checkpoint or blob file is truncated or fails its checksum."""


class CheckpointVersionError(IntegrityError):
    """A checkpoint was written by an incompatible format version."""


class TrainingDivergedError(MMVAEError, RuntimeError):
    """The loss became NaN/Inf; carries the last good checkpoint path."""

    def __init__(self, message: str, last_good_checkpoint: Optional[str] = None):
        where = last_good_checkpoint or "none written yet"
        super().__init__(f"{message}; last good checkpoint: {where}")
        self.last_good_checkpoint = last_good_checkpoint
