"""Instruction templates over the fixed vocabulary.

The object is always named, even in single-object scenes.
"""

import numpy as np

from internal.models.errors import VocabularyError
from internal.models.types import PAD_TOKEN, VOCABULARY
from internal.scenegen.scene import SceneSpec

_TEMPLATES = {
    "reach": ("reach", "the", "{object}"),
    "lift": ("lift", "the", "{object}"),
    "move_left": ("move", "left", "the", "{object}"),
    "move_right": ("move", "right", "the", "{object}"),
    "reach_lift_insert": ("put", "the", "{object}"),
    "reach_lift_insert_close": ("put", "the", "{object}", "close", "the", "drawer"),
}


def instruction_words(scene: SceneSpec) -> list:
    kind = scene.target.kind
    return [kind if word == "{object}" else word for word in _TEMPLATES[scene.task]]


def encode_words(words: list, vocabulary: tuple = VOCABULARY, l_max: int = 8) -> np.ndarray:
    """Word list -> (l_max,) int64 token indices, PAD-padded."""
    if len(words) > l_max:
        raise VocabularyError(f"instruction of {len(words)} words exceeds l_max={l_max}")
    index = {word: i for i, word in enumerate(vocabulary)}
    missing = [w for w in words if w not in index]
    if missing:
        raise VocabularyError(f"words not in vocabulary: {missing}")
    tokens = np.full(l_max, index[PAD_TOKEN], dtype=np.int64)
    tokens[:len(words)] = [index[w] for w in words]
    return tokens


def make_instruction(scene: SceneSpec, vocabulary: tuple = VOCABULARY, l_max: int = 8) -> np.ndarray:
    return encode_words(instruction_words(scene), vocabulary, l_max)


def decode_tokens(tokens, vocabulary: tuple = VOCABULARY) -> str:
    """Token indices -> words joined by spaces, PAD dropped."""
    words = []
    for t in np.asarray(tokens).tolist():
        if not 0 <= t < len(vocabulary):
            raise VocabularyError(f"token index {t} outside vocabulary of size {len(vocabulary)}")
        if vocabulary[t] != PAD_TOKEN:
            words.append(vocabulary[t])
    return " ".join(words)
