"""Answer providers (the bandit's arms) and their registry.

Built-in local arms: BM25 search over a document corpus (with trigram-based
fuzzy matching for misspellings) and a curated-FAQ matcher.  Remote arms are
HTTP adapters; an unreachable or malformed remote is reported as unavailable
so the policy can mask it for the round.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

import httpx

from .core import ArmDescriptor, ValidationError
from .featurizer import char_ngrams, tokenize

BM25_K1 = 1.2
BM25_B = 0.75
FUZZY_THRESHOLD = 0.4
FAQ_THRESHOLD = 0.2

_SENTENCE_RE = re.compile(r"[^.?!]+[.?!]?")


class ArmUnavailable(Exception):
    """The provider cannot answer this round (down, timed out, empty corpus)."""


class RegistrationError(ValueError):
    """Duplicate arm name."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    body: str

    def __post_init__(self) -> None:
        if not self.doc_id:
            raise ValidationError("doc_id must be non-empty")
        if not self.body.strip():
            raise ValidationError(f"document {self.doc_id!r} has an empty body")


@dataclass(frozen=True)
class ArmAnswer:
    """An arm's answer.  score semantics are arm-specific; empty text with
    score 0 is the no-answer result."""

    answer_text: str
    source_doc_ids: tuple[str, ...] = ()
    score: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.score):
            raise ValidationError("score must be finite")


NO_ANSWER = ArmAnswer(answer_text="", source_doc_ids=(), score=0.0)


class Corpus:
    """Immutable document collection with the indexes search needs.

    Documents are kept sorted by doc_id so every ranking tie-break is
    deterministic.  Token statistics cover title + body.
    """

    def __init__(self, documents: list[Document]):
        if not documents:
            raise ValidationError("corpus must contain at least one document")
        seen: set[str] = set()
        for doc in documents:
            if doc.doc_id in seen:
                raise ValidationError(f"duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
        self.documents = sorted(documents, key=lambda d: d.doc_id)
        self.term_freqs: list[Counter[str]] = [
            Counter(tokenize(f"{d.title} {d.body}")) for d in self.documents
        ]
        self.doc_lengths = [sum(tf.values()) for tf in self.term_freqs]
        self.avg_doc_length = sum(self.doc_lengths) / len(self.documents)
        self.doc_freq: Counter[str] = Counter()
        for tf in self.term_freqs:
            self.doc_freq.update(tf.keys())
        self.vocabulary = frozenset(self.doc_freq)
        # postings: term -> [(doc index, tf)], in doc_id order
        self.postings: dict[str, list[tuple[int, int]]] = {}
        for i, tf in enumerate(self.term_freqs):
            for term, count in tf.items():
                self.postings.setdefault(term, []).append((i, count))
        # trigram index narrows fuzzy-match candidates
        self.term_trigrams = {t: char_ngrams(t, 3) for t in self.vocabulary}
        self.trigram_index: dict[str, set[str]] = {}
        for term, grams in self.term_trigrams.items():
            for g in grams:
                self.trigram_index.setdefault(g, set()).add(term)
        self._by_id = {d.doc_id: i for i, d in enumerate(self.documents)}

    def __len__(self) -> int:
        return len(self.documents)

    def document(self, doc_id: str) -> Document:
        index = self._by_id.get(doc_id)
        if index is None:
            raise KeyError(doc_id)
        return self.documents[index]

    @classmethod
    def load(cls, path: str | Path) -> Corpus:
        """Load a directory of UTF-8 .txt files (first line = title) or a
        JSONL file with {doc_id, title, body} per line."""
        path = Path(path)
        docs: list[Document] = []
        if path.is_dir():
            for file in sorted(path.glob("*.txt")):
                text = file.read_text(encoding="utf-8")
                title, _, body = text.partition("\n")
                docs.append(Document(doc_id=file.stem, title=title.strip(), body=body.strip() or title))
        else:
            with path.open(encoding="utf-8") as handle:
                for line_no, line in enumerate(handle, start=1):
                    if not line.strip():
                        continue
                    try:
                        obj = json.loads(line)
                        docs.append(Document(obj["doc_id"], obj.get("title", ""), obj["body"]))
                    except (json.JSONDecodeError, KeyError, TypeError) as exc:
                        raise ValidationError(f"{path}:{line_no}: bad corpus line: {exc}") from exc
        return cls(docs)


def trigram_jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def fuzzy_resolve(
    token: str,
    vocabulary: frozenset[str] | set[str],
    trigram_index: dict[str, set[str]] | None = None,
    threshold: float = FUZZY_THRESHOLD,
) -> str | None:
    """Map a possibly misspelled token onto a vocabulary term.

    Exact members resolve to themselves.  Otherwise the vocabulary term with
    maximal trigram Jaccard similarity wins if it reaches ``threshold``;
    ties break lexicographically.  Returns None when nothing is close.
    """
    if token in vocabulary:
        return token
    grams = char_ngrams(token, 3)
    if trigram_index is not None:
        candidates: set[str] = set()
        for g in grams:
            candidates |= trigram_index.get(g, set())
    else:
        candidates = set(vocabulary)
    best_term: str | None = None
    best_score = 0.0
    for term in sorted(candidates):
        score = trigram_jaccard(grams, char_ngrams(term, 3))
        if score > best_score:
            best_term, best_score = term, score
    if best_score >= threshold:
        return best_term
    return None


def bm25_score(
    query_tokens: list[str],
    term_freq: Counter[str],
    doc_length: int,
    num_docs: int,
    doc_freq: Counter[str],
    avg_doc_length: float,
    k1: float = BM25_K1,
    b: float = BM25_B,
) -> float:
    """BM25 with idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)).

    Sums over the distinct query terms present in the document.
    """
    score = 0.0
    for term in set(query_tokens):
        tf = term_freq.get(term, 0)
        if tf == 0:
            continue
        df = doc_freq[term]
        idf = math.log(1.0 + (num_docs - df + 0.5) / (df + 0.5))
        norm = k1 * (1.0 - b + b * doc_length / avg_doc_length)
        score += idf * tf * (k1 + 1.0) / (tf + norm)
    return score


def resolve_query_tokens(
    query_tokens: list[str], corpus: Corpus, threshold: float = FUZZY_THRESHOLD
) -> list[str]:
    """Fuzzy-resolve each query token against the corpus vocabulary,
    dropping tokens that resolve to nothing."""
    resolved = []
    for token in query_tokens:
        term = fuzzy_resolve(token, corpus.vocabulary, corpus.trigram_index, threshold)
        if term is not None:
            resolved.append(term)
    return resolved


def search(
    corpus: Corpus, query_tokens: list[str], fuzzy_threshold: float = FUZZY_THRESHOLD
) -> list[tuple[Document, float]]:
    """Rank documents by BM25 over fuzzy-resolved query tokens.

    Deterministic total order: score descending, then doc_id ascending.
    Documents matching no term are omitted.
    """
    terms = resolve_query_tokens(query_tokens, corpus, fuzzy_threshold)
    if not terms:
        return []
    candidate_ids: set[int] = set()
    for term in set(terms):
        candidate_ids.update(i for i, _ in corpus.postings.get(term, ()))
    scored = []
    for i in sorted(candidate_ids):
        score = bm25_score(
            terms,
            corpus.term_freqs[i],
            corpus.doc_lengths[i],
            len(corpus),
            corpus.doc_freq,
            corpus.avg_doc_length,
        )
        scored.append((corpus.documents[i], score))
    scored.sort(key=lambda pair: (-pair[1], pair[0].doc_id))
    return scored


def sentence_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of sentences split at . ? ! — trimmed of whitespace."""
    spans = []
    for match in _SENTENCE_RE.finditer(text):
        raw = match.group()
        start = match.start() + (len(raw) - len(raw.lstrip()))
        end = match.end() - (len(raw) - len(raw.rstrip()))
        if start < end:
            spans.append((start, end))
    return spans


def _sentence_score(query_tokens: list[str], sentence: str) -> int:
    sentence_vocab = frozenset(tokenize(sentence))
    if not sentence_vocab:
        return 0
    hits = 0
    for token in set(query_tokens):
        if fuzzy_resolve(token, sentence_vocab) is not None:
            hits += 1
    return hits


def highlight_span(query_tokens: list[str], answer_text: str) -> list[tuple[int, int]]:
    """Span of the sentence sharing the most distinct query tokens.

    Fuzzy matching applies, so misspelled queries still highlight.  Ties go
    to the earliest sentence; no overlap at all yields an empty list.
    """
    if not answer_text:
        raise ValidationError("answer_text must be non-empty")
    best_span: tuple[int, int] | None = None
    best_score = 0
    for start, end in sentence_spans(answer_text):
        score = _sentence_score(query_tokens, answer_text[start:end])
        if score > best_score:
            best_span, best_score = (start, end), score
    return [best_span] if best_span else []


class SearchArm:
    """BM25 search over the corpus.  The answer concatenates the top-k titles
    and the best snippet of the top document."""

    def __init__(self, corpus: Corpus | None, top_k: int = 3):
        self.corpus = corpus
        self.top_k = top_k

    def answer(self, utterance: str) -> ArmAnswer:
        if self.corpus is None or len(self.corpus) == 0:
            raise ArmUnavailable("search arm has no corpus")
        tokens = tokenize(utterance)
        ranked = search(self.corpus, tokens)
        if not ranked:
            return NO_ANSWER
        top = ranked[: self.top_k]
        lines = [doc.title or doc.doc_id for doc, _ in top]
        top_doc = top[0][0]
        snippet_spans = highlight_span(tokens, top_doc.body)
        if snippet_spans:
            start, end = snippet_spans[0]
            lines.append(top_doc.body[start:end])
        return ArmAnswer(
            answer_text="\n".join(lines),
            source_doc_ids=tuple(doc.doc_id for doc, _ in top),
            score=top[0][1],
        )


@dataclass(frozen=True)
class FaqEntry:
    question: str
    answer: str

    @property
    def key_tokens(self) -> frozenset[str]:
        return frozenset(tokenize(self.question))


def load_faq(path: str | Path) -> list[FaqEntry]:
    """JSONL file with {question, answer} per line."""
    entries = []
    with Path(path).open(encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entries.append(FaqEntry(obj["question"], obj["answer"]))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValidationError(f"{path}:{line_no}: bad FAQ line: {exc}") from exc
    return entries


def _jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    union = len(a | b)
    return len(a & b) / union if union else 0.0


def _overlap(a: frozenset[str], b: frozenset[str]) -> float:
    smaller = min(len(a), len(b))
    return len(a & b) / smaller if smaller else 0.0


class FaqArm:
    """Curated question->answer table matched by token-set similarity.

    ``metric`` is "jaccard" (default) or "overlap" (|intersection| / smaller
    set, a keyword-overlap variant).  Below ``threshold`` the arm returns the
    no-answer result with score 0.
    """

    def __init__(self, entries: list[FaqEntry], metric: str = "jaccard", threshold: float = FAQ_THRESHOLD):
        if metric not in ("jaccard", "overlap"):
            raise ValidationError(f"unknown FAQ metric {metric!r}")
        self.entries = entries
        self.metric = _jaccard if metric == "jaccard" else _overlap
        self.threshold = threshold

    def answer(self, utterance: str) -> ArmAnswer:
        if not self.entries:
            raise ArmUnavailable("FAQ arm has an empty table")
        query_set = frozenset(tokenize(utterance))
        best_entry: FaqEntry | None = None
        best_score = -1.0
        for entry in self.entries:
            score = self.metric(query_set, entry.key_tokens)
            if score > best_score:
                best_entry, best_score = entry, score
        if best_entry is None or best_score < self.threshold:
            return NO_ANSWER
        return ArmAnswer(answer_text=best_entry.answer, source_doc_ids=(), score=best_score)


class RemoteArm:
    """HTTP adapter: POST {"utterance": ...}, expect {"answer_text", "score"}.

    Timeouts, non-2xx statuses, and schema violations all surface as
    ArmUnavailable so the round falls back to other arms.
    """

    def __init__(self, endpoint: str, timeout_ms: int = 800):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms

    def answer(self, utterance: str) -> ArmAnswer:
        try:
            response = httpx.post(
                self.endpoint,
                json={"utterance": utterance},
                timeout=self.timeout_ms / 1000.0,
            )
        except httpx.HTTPError as exc:
            raise ArmUnavailable(f"remote arm {self.endpoint} unreachable: {exc}") from exc
        if not 200 <= response.status_code < 300:
            raise ArmUnavailable(f"remote arm {self.endpoint} returned {response.status_code}")
        try:
            payload = response.json()
        except ValueError as exc:
            raise ArmUnavailable(f"remote arm {self.endpoint} sent invalid JSON") from exc
        answer_text = payload.get("answer_text") if isinstance(payload, dict) else None
        score = payload.get("score") if isinstance(payload, dict) else None
        if not isinstance(answer_text, str) or not answer_text:
            raise ArmUnavailable(f"remote arm {self.endpoint} response missing answer_text")
        if not isinstance(score, (int, float)) or isinstance(score, bool) or not math.isfinite(score):
            raise ArmUnavailable(f"remote arm {self.endpoint} response missing numeric score")
        return ArmAnswer(answer_text=answer_text, source_doc_ids=(), score=float(score))


class ArmRegistry:
    """Registry assigning dense ids 0..K-1 in registration order."""

    def __init__(self) -> None:
        self._descriptors: list[ArmDescriptor] = []
        self._providers: list = []
        self._names: set[str] = set()

    def register_arm(self, descriptor: ArmDescriptor, provider) -> int:
        if descriptor.name in self._names:
            raise RegistrationError(f"arm name {descriptor.name!r} already registered")
        arm_id = len(self._descriptors)
        self._descriptors.append(replace(descriptor, arm_id=arm_id))
        self._providers.append(provider)
        self._names.add(descriptor.name)
        return arm_id

    @property
    def arms(self) -> tuple[ArmDescriptor, ...]:
        return tuple(self._descriptors)

    def descriptor(self, arm_id: int) -> ArmDescriptor:
        return self._descriptors[arm_id]

    def answer(self, arm_id: int, utterance: str) -> ArmAnswer:
        if not 0 <= arm_id < len(self._providers):
            raise ValidationError(f"unknown arm_id {arm_id}")
        return self._providers[arm_id].answer(utterance)

    def __len__(self) -> int:
        return len(self._descriptors)
