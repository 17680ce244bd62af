"""Shared domain types and reward normalization.

Everything here is an immutable value object, safe to share across threads.
Validation happens at construction; downstream modules can assume the
invariants hold.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

STAR_MIN = 1
STAR_MAX = 5


class ValidationError(ValueError):
    """Raised when a value object is constructed from invalid inputs."""


def normalize_stars(stars: int) -> float:
    """Map a 1-5 star rating onto a reward in [0, 1] via (stars - 1) / 4.

    Strictly monotone; 1 -> 0.0, 3 -> 0.5, 5 -> 1.0.
    """
    if not isinstance(stars, int) or isinstance(stars, bool):
        raise ValidationError(f"stars must be an integer, got {stars!r}")
    if not STAR_MIN <= stars <= STAR_MAX:
        raise ValidationError(f"stars must be in {STAR_MIN}..{STAR_MAX}, got {stars}")
    return (stars - 1) / 4


@dataclass(frozen=True)
class Query:
    """One customer utterance addressed to the suggestion loop."""

    session_id: str
    utterance: str
    timestamp_ms: int = 0

    def __post_init__(self) -> None:
        if not self.session_id:
            raise ValidationError("session_id must be non-empty")
        if not self.utterance.strip():
            raise ValidationError("utterance must be non-empty after trimming")


@dataclass(frozen=True)
class Session:
    """A chat session: id plus a bounded window of prior utterances.

    ``history`` is ordered oldest-first.  Appending past the window drops
    the oldest entries.
    """

    session_id: str
    history: tuple[str, ...] = ()
    window: int = 6

    def __post_init__(self) -> None:
        if not self.session_id:
            raise ValidationError("session_id must be non-empty")
        if self.window < 1:
            raise ValidationError("window must be >= 1")
        if len(self.history) > self.window:
            raise ValidationError(
                f"history length {len(self.history)} exceeds window {self.window}"
            )

    def with_utterance(self, utterance: str) -> Session:
        """Return a new session with ``utterance`` appended, oldest dropped."""
        history = (*self.history, utterance)[-self.window :]
        return Session(self.session_id, history, self.window)


@dataclass(frozen=True)
class FeatureVector:
    """Sparse context embedding: index -> value over a fixed dimension.

    Invariants: every index is in [0, dimension); no explicit zero entries;
    all values finite.
    """

    dimension: int
    entries: dict[int, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValidationError("dimension must be positive")
        for idx, val in self.entries.items():
            if not 0 <= idx < self.dimension:
                raise ValidationError(f"index {idx} out of range for dimension {self.dimension}")
            if val == 0.0:
                raise ValidationError(f"explicit zero entry at index {idx}")
            if not math.isfinite(val):
                raise ValidationError(f"non-finite value {val} at index {idx}")

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.entries.values()))

    def to_dense(self):
        """Materialize as a float64 numpy array of length ``dimension``."""
        import numpy as np

        out = np.zeros(self.dimension)
        for idx, val in self.entries.items():
            out[idx] = val
        return out

    @classmethod
    def from_dense(cls, values) -> FeatureVector:
        entries = {int(i): float(v) for i, v in enumerate(values) if v != 0.0}
        return cls(dimension=len(values), entries=entries)


class ArmKind(str, enum.Enum):
    SEARCH = "search"
    FAQ = "faq"
    REMOTE = "remote"


@dataclass(frozen=True)
class ArmDescriptor:
    """One selectable answer provider.  Ids are dense 0..K-1."""

    arm_id: int
    name: str
    kind: ArmKind

    def __post_init__(self) -> None:
        if self.arm_id < 0:
            raise ValidationError("arm_id must be non-negative")
        if not self.name:
            raise ValidationError("arm name must be non-empty")


@dataclass(frozen=True)
class Suggestion:
    """One surfaced answer: the chosen arm's text plus logging metadata."""

    suggestion_id: str
    arm_id: int
    answer_text: str
    highlights: tuple[tuple[int, int], ...] = ()
    propensity: float = 1.0
    clarifying_question: str | None = None

    def __post_init__(self) -> None:
        if not self.suggestion_id:
            raise ValidationError("suggestion_id must be non-empty")
        if not 0.0 < self.propensity <= 1.0:
            raise ValidationError(f"propensity must be in (0, 1], got {self.propensity}")
        prev_end = 0
        for start, end in sorted(self.highlights):
            if not 0 <= start < end <= len(self.answer_text):
                raise ValidationError(f"highlight span ({start}, {end}) out of bounds")
            if start < prev_end:
                raise ValidationError("highlight spans overlap")
            prev_end = end


@dataclass(frozen=True)
class FeedbackEvent:
    """A 1-5 star rating tied to a previously issued suggestion."""

    suggestion_id: str
    stars: int
    received_at_ms: int = 0

    def __post_init__(self) -> None:
        if not STAR_MIN <= self.stars <= STAR_MAX:
            raise ValidationError(f"stars must be in {STAR_MIN}..{STAR_MAX}, got {self.stars}")

    @property
    def reward(self) -> float:
        return normalize_stars(self.stars)


@dataclass(frozen=True)
class InteractionRecord:
    """One logged decision: (context, arm, propensity, reward) plus audit fields.

    ``reward`` is None when the agent never rated the suggestion; such
    records are excluded from learning but kept for accounting.
    """

    session_id: str
    ts: int
    context: FeatureVector
    arm_id: int
    propensity: float
    reward: float | None
    policy_name: str
    stars: int | None = None
    seed_state_digest: str | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.propensity <= 1.0:
            raise ValidationError(f"propensity must be in (0, 1], got {self.propensity}")
        if self.reward is not None and not 0.0 <= self.reward <= 1.0:
            raise ValidationError(f"reward must be in [0, 1], got {self.reward}")
        if self.stars is not None and not STAR_MIN <= self.stars <= STAR_MAX:
            raise ValidationError(f"stars must be in {STAR_MIN}..{STAR_MAX}, got {self.stars}")
        if self.arm_id < 0:
            raise ValidationError("arm_id must be non-negative")
