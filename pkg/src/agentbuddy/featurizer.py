"""Deterministic text -> FeatureVector pipeline.

Tokens are hashed into a fixed-dimension sparse vector (hashing trick) with
FNV-1a 64-bit, giving bit-identical vectors across platforms and runs.
Chat history enters the context with exponential decay.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .core import FeatureVector, Query, Session, ValidationError

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1
_SIGN_BIT = 1 << 63

# unicode alphanumeric runs, underscore treated as a separator
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class FeaturizerConfig:
    dimension: int = 1 << 18
    ngram_max: int = 2
    history_decay: float = 0.5
    lowercase: bool = True

    def __post_init__(self) -> None:
        if self.dimension < 1 or self.dimension & (self.dimension - 1) != 0:
            raise ValidationError(f"dimension must be a power of two, got {self.dimension}")
        if not 0.0 <= self.history_decay < 1.0:
            raise ValidationError(f"history_decay must be in [0, 1), got {self.history_decay}")
        if self.ngram_max < 1:
            raise ValidationError("ngram_max must be >= 1")


def fnv1a64(data: str | bytes) -> int:
    """FNV-1a 64-bit hash of UTF-8 text (or raw bytes)."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Split on any non-alphanumeric character, dropping empties.

    Order is preserved; case is folded unless ``lowercase`` is False.
    """
    if lowercase:
        text = text.lower()
    return _TOKEN_RE.findall(text)


def char_ngrams(token: str, n: int = 3) -> frozenset[str]:
    """All contiguous length-``n`` substrings of ``token``, deduplicated.

    Tokens shorter than ``n`` yield the singleton {token}.
    """
    if not token:
        raise ValidationError("token must be non-empty")
    if len(token) < n:
        return frozenset((token,))
    return frozenset(token[i : i + n] for i in range(len(token) - n + 1))


def _accumulate(tokens: list[str], config: FeaturizerConfig, acc: dict[int, float], scale: float) -> None:
    for n in range(1, config.ngram_max + 1):
        for i in range(len(tokens) - n + 1):
            feature = tokens[i] if n == 1 else " ".join(tokens[i : i + n])
            h = fnv1a64(feature)
            sign = 1.0 if h & _SIGN_BIT == 0 else -1.0
            idx = h % config.dimension
            acc[idx] = acc.get(idx, 0.0) + sign * scale


def _to_unit_vector(acc: dict[int, float], dimension: int) -> FeatureVector:
    entries = {i: v for i, v in acc.items() if v != 0.0}
    norm = math.sqrt(sum(v * v for v in entries.values()))
    if norm > 0.0:
        entries = {i: v / norm for i, v in entries.items()}
    return FeatureVector(dimension=dimension, entries=entries)


def hash_features(tokens: list[str], config: FeaturizerConfig) -> FeatureVector:
    """Hash unigrams and n-grams up to ``ngram_max`` into a unit sparse vector.

    index = fnv1a64(feature) mod dimension; sign from bit 63 of the hash.
    Colliding contributions sum; the result is L2-normalized unless all-zero.
    """
    acc: dict[int, float] = {}
    _accumulate(tokens, config, acc, 1.0)
    return _to_unit_vector(acc, config.dimension)


def build_context(query: Query, session: Session, config: FeaturizerConfig) -> FeatureVector:
    """Combine the query with exponentially decayed session history.

    hash_features(query) + sum_i decay^i * hash_features(history[-i]),
    re-normalized to unit L2 norm if nonzero.  i counts back from the most
    recent history entry.
    """
    acc: dict[int, float] = {}
    query_vec = hash_features(tokenize(query.utterance, config.lowercase), config)
    for idx, val in query_vec.entries.items():
        acc[idx] = acc.get(idx, 0.0) + val

    decay = config.history_decay
    for i, utterance in enumerate(reversed(session.history), start=1):
        weight = decay**i
        if weight == 0.0:
            break
        past = hash_features(tokenize(utterance, config.lowercase), config)
        for idx, val in past.entries.items():
            acc[idx] = acc.get(idx, 0.0) + weight * val

    return _to_unit_vector(acc, config.dimension)
