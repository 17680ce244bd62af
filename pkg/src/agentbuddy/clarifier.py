"""Greedy clarifying-question selection.

When retrieval leaves several near-tied candidate answers, one bag-of-words
filter question ("Does your request involve 'wire'?") splits the candidate
set.  The term is chosen to minimize the expected number of candidates
remaining, with the yes-probability taken as the empirical proportion of
candidates containing the term.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import ValidationError

# Function words make useless filters.  Fixed list, 50 words.
STOPWORDS = frozenset(
    """
    a an the and or but if when how at by for from in into of on to with as
    is are was were be been being do does did have has had i you he she it
    we they this that these those my your not no can will
    """.split()
)

DEFAULT_NEAR_RATIO = 0.5
DEFAULT_MIN_NEAR = 4
DEFAULT_MARGIN_RATIO = 0.1


class ContradictionError(Exception):
    """Filter answers eliminated every candidate; the customer's replies do
    not match any known answer."""


@dataclass(frozen=True)
class Filter:
    term: str
    yes_count: int
    total: int

    def __post_init__(self) -> None:
        if not self.term:
            raise ValidationError("filter term must be non-empty")
        if not 0 <= self.yes_count <= self.total:
            raise ValidationError(
                f"yes_count {self.yes_count} outside [0, {self.total}]"
            )


class CandidateSet:
    """Ordered candidate doc_ids with per-candidate token sets (stopwords
    already removed).  Immutable; filtering returns a new set."""

    def __init__(self, doc_ids: list[str], token_sets: dict[str, frozenset[str]]):
        if not doc_ids:
            raise ValidationError("candidate set must be non-empty")
        if len(set(doc_ids)) != len(doc_ids):
            raise ValidationError("duplicate candidate doc_ids")
        for doc_id in doc_ids:
            if doc_id not in token_sets:
                raise ValidationError(f"missing token set for {doc_id!r}")
        self.doc_ids = tuple(doc_ids)
        self.token_sets = {d: frozenset(token_sets[d]) for d in doc_ids}

    @classmethod
    def from_documents(cls, docs) -> CandidateSet:
        """Build from (doc_id, tokens) pairs, dropping stopwords."""
        ids, sets = [], {}
        for doc_id, tokens in docs:
            ids.append(doc_id)
            sets[doc_id] = frozenset(tokens) - STOPWORDS
        return cls(ids, sets)

    def __len__(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.token_sets

    def containing(self, term: str) -> int:
        return sum(1 for d in self.doc_ids if term in self.token_sets[d])

    def vocabulary(self) -> frozenset[str]:
        """Terms in at least one and at most n-1 candidates; stopwords are
        already gone from the token sets."""
        n = len(self.doc_ids)
        counts: dict[str, int] = {}
        for d in self.doc_ids:
            for term in self.token_sets[d]:
                counts[term] = counts.get(term, 0) + 1
        return frozenset(t for t, c in counts.items() if 1 <= c <= n - 1)


def is_ambiguous(
    ranked_scores,
    near_ratio: float = DEFAULT_NEAR_RATIO,
    min_near: int = DEFAULT_MIN_NEAR,
    margin_ratio: float = DEFAULT_MARGIN_RATIO,
) -> bool:
    """True when retrieval cannot commit: at least ``min_near`` candidates
    score within ``near_ratio`` of the top and the top two are separated by
    less than ``margin_ratio`` of the top score.

    ``ranked_scores`` must be descending.  Fewer than 2 candidates is never
    ambiguous.
    """
    scores = [float(s) for s in ranked_scores]
    if len(scores) < 2:
        return False
    if any(scores[j] < scores[j + 1] for j in range(len(scores) - 1)):
        raise ValidationError("scores must be ranked descending")
    top = scores[0]
    if top <= 0.0:
        return False
    near = sum(1 for s in scores if s >= near_ratio * top)
    return near >= min_near and (top - scores[1]) < margin_ratio * top


def expected_remaining(candidates: CandidateSet, flt: Filter) -> float:
    """Expected candidate count after asking the filter, under yes-probability
    k/n: (k^2 + (n-k)^2) / n.  A filter splitting nothing (k in {0, n})
    leaves n."""
    n = len(candidates)
    if flt.total != n:
        raise ValidationError(f"filter total {flt.total} != candidate count {n}")
    k = flt.yes_count
    return (k * k + (n - k) * (n - k)) / n


def best_filter(candidates: CandidateSet, vocabulary=None) -> Filter | None:
    """One greedy step: the vocabulary term minimizing expected_remaining,
    lexicographic on ties.  None when no term splits the set."""
    n = len(candidates)
    if vocabulary is None:
        vocabulary = candidates.vocabulary()
    best: Filter | None = None
    best_value = float("inf")
    for term in sorted(vocabulary):
        k = candidates.containing(term)
        if not 0 < k < n:
            continue
        value = (k * k + (n - k) * (n - k)) / n
        if value < best_value:
            best_value = value
            best = Filter(term=term, yes_count=k, total=n)
    return best


def apply_filter(candidates: CandidateSet, flt: Filter, answer: str) -> CandidateSet:
    """Keep candidates containing the term (yes) or lacking it (no).

    Raises ContradictionError if nothing survives: the customer's answers
    are inconsistent with every candidate answer.
    """
    if answer not in ("yes", "no"):
        raise ValidationError(f"answer must be 'yes' or 'no', got {answer!r}")
    keep_containing = answer == "yes"
    kept = [
        d
        for d in candidates.doc_ids
        if (flt.term in candidates.token_sets[d]) == keep_containing
    ]
    if not kept:
        raise ContradictionError(
            f"no candidate answers remain after {answer!r} on {flt.term!r}"
        )
    return CandidateSet(kept, {d: candidates.token_sets[d] for d in kept})


def render_question(flt: Filter) -> str:
    return f"Does your request involve '{flt.term}'?"
