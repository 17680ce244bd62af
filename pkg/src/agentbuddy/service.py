"""REST service for the suggestion loop.

One suggest call builds the context, lets the policy pick an arm (masking
arms that fail to answer), logs a pending interaction, and optionally
attaches a clarifying question.  Feedback finalizes the pending record and
updates the policy.  SuggestEngine carries all of that without any HTTP so
the CLI's one-shot `ask` reuses it; create_app() wraps it for FastAPI.

All policy mutation, session state, and log appends funnel through one
re-entrant lock (single-writer path).
"""

from __future__ import annotations

import contextlib
import os
import threading
import time
import uuid
from dataclasses import dataclass

from fastapi import Depends, FastAPI, HTTPException, Request
from pydantic import BaseModel

from . import clarifier as clar
from .arms import (
    ArmRegistry,
    ArmUnavailable,
    Corpus,
    FaqArm,
    RemoteArm,
    SearchArm,
    highlight_span,
    load_faq,
    search,
)
from .clarifier import CandidateSet, ContradictionError, Filter
from .config import ServiceConfig
from .core import (
    ArmDescriptor,
    ArmKind,
    InteractionRecord,
    Query,
    Session,
    Suggestion,
    ValidationError,
    normalize_stars,
)
from .evaluation import InteractionLog, LogWriteError
from .featurizer import build_context, tokenize
from .policies import NoArmAvailable, PolicyState, RestoreError


class UnknownSuggestion(KeyError):
    """suggestion_id is not pending (never seen, expired, or finalized)."""


class NoActiveClarification(KeyError):
    """The session has no live clarifying question on that term."""


class AllArmsUnavailable(Exception):
    """Every registered arm failed to produce an answer."""


@dataclass
class _Pending:
    session_id: str
    ts: int
    context: object
    arm_id: int
    propensity: float
    policy_name: str
    expires_at: float


@dataclass
class _ClarifyState:
    candidates: CandidateSet
    filter: Filter


@dataclass(frozen=True)
class ClarifyOutcome:
    remaining_count: int
    next_question: str | None = None
    resolved_answer: str | None = None


class SuggestEngine:
    """The full loop behind the endpoints, independent of any web framework."""

    def __init__(self, config: ServiceConfig, clock=time.time):
        self.config = config
        self.clock = clock
        self._lock = threading.RLock()
        self._started = time.monotonic()
        self.corpus = Corpus.load(config.corpus_path) if config.corpus_path else None
        faq_entries = load_faq(config.faq_path) if config.faq_path else []
        self.registry = ArmRegistry()
        if self.corpus is not None:
            self.registry.register_arm(
                ArmDescriptor(arm_id=0, name="search", kind=ArmKind.SEARCH),
                SearchArm(self.corpus),
            )
        if faq_entries:
            self.registry.register_arm(
                ArmDescriptor(arm_id=0, name="faq", kind=ArmKind.FAQ),
                FaqArm(faq_entries, metric="jaccard"),
            )
            self.registry.register_arm(
                ArmDescriptor(arm_id=0, name="faq-keyword", kind=ArmKind.FAQ),
                FaqArm(faq_entries, metric="overlap"),
            )
        for name, endpoint in config.remote_arms:
            self.registry.register_arm(
                ArmDescriptor(arm_id=0, name=name, kind=ArmKind.REMOTE),
                RemoteArm(endpoint),
            )
        if len(self.registry) == 0:
            raise ValidationError("no arms configured: need a corpus, FAQ, or remote arm")
        self.policy = PolicyState(
            config.policy, config.featurizer.dimension, len(self.registry)
        )
        self.log = InteractionLog(config.log_path)
        self._sessions: dict[str, Session] = {}
        self._pending: dict[str, _Pending] = {}
        self._finalized: dict[str, float] = {}
        self._clarify: dict[str, _ClarifyState] = {}
        self.feedback_count = 0
        self.stars_total = 0

    # -- time and bookkeeping ---------------------------------------------

    def _now(self) -> float:
        return float(self.clock())

    def _prune(self, now: float) -> None:
        """Expire pending suggestions; each expiry finalizes its record with
        a null reward so the log still shows the suggest."""
        expired = [sid for sid, p in self._pending.items() if now > p.expires_at]
        for sid in expired:
            pending = self._pending.pop(sid)
            self._append_record(pending, reward=None, stars=None)
        ttl = self.config.feedback_ttl_seconds
        for sid in [s for s, t in self._finalized.items() if now - t > ttl]:
            del self._finalized[sid]

    def _append_record(self, pending: _Pending, reward, stars) -> None:
        self.log.append(
            InteractionRecord(
                session_id=pending.session_id,
                ts=pending.ts,
                context=pending.context,
                arm_id=pending.arm_id,
                propensity=pending.propensity,
                reward=reward,
                policy_name=pending.policy_name,
                stars=stars,
            )
        )

    # -- operations --------------------------------------------------------

    def suggest(self, session_id: str, utterance: str) -> Suggestion:
        now = self._now()
        query = Query(session_id=session_id, utterance=utterance, timestamp_ms=int(now * 1000))
        with self._lock:
            self._prune(now)
            session = self._sessions.get(session_id) or Session(session_id)
            context = build_context(query, session, self.config.featurizer)
            available = list(range(len(self.registry)))
            while True:
                if not available:
                    raise AllArmsUnavailable("no arm could answer")
                try:
                    arm_id, propensity = self.policy.choose(context, available)
                except NoArmAvailable as exc:
                    raise AllArmsUnavailable(str(exc)) from exc
                try:
                    answer = self.registry.answer(arm_id, utterance)
                    break
                except ArmUnavailable:
                    available.remove(arm_id)
            tokens = tokenize(utterance, self.config.featurizer.lowercase)
            # The no-answer result has empty text; nothing to highlight.
            highlights = (
                tuple(highlight_span(tokens, answer.answer_text))
                if answer.answer_text
                else ()
            )
            question = self._maybe_clarify(session_id, tokens)
            suggestion_id = uuid.uuid4().hex
            self._pending[suggestion_id] = _Pending(
                session_id=session_id,
                ts=int(now * 1000),
                context=context,
                arm_id=arm_id,
                propensity=propensity,
                policy_name=self.policy.policy_name,
                expires_at=now + self.config.feedback_ttl_seconds,
            )
            self._sessions[session_id] = session.with_utterance(utterance)
            return Suggestion(
                suggestion_id=suggestion_id,
                arm_id=arm_id,
                answer_text=answer.answer_text,
                highlights=highlights,
                propensity=propensity,
                clarifying_question=question,
            )

    def _maybe_clarify(self, session_id: str, query_tokens: list[str]) -> str | None:
        """Attach a clarifying question when retrieval is ambiguous."""
        if self.corpus is None:
            return None
        cfg = self.config.clarifier
        ranked = search(self.corpus, query_tokens)[: cfg.candidate_pool]
        scores = [score for _, score in ranked]
        if not clar.is_ambiguous(
            scores,
            near_ratio=cfg.near_ratio,
            min_near=cfg.min_near,
            margin_ratio=cfg.margin_ratio,
        ):
            self._clarify.pop(session_id, None)
            return None
        candidates = CandidateSet.from_documents(
            (doc.doc_id, tokenize(doc.title) + tokenize(doc.body)) for doc, _ in ranked
        )
        flt = clar.best_filter(candidates)
        if flt is None:
            self._clarify.pop(session_id, None)
            return None
        self._clarify[session_id] = _ClarifyState(candidates=candidates, filter=flt)
        return clar.render_question(flt)

    def feedback(self, suggestion_id: str, stars: int) -> bool:
        """Finalize one suggestion; returns False when already recorded."""
        reward = normalize_stars(stars)
        now = self._now()
        with self._lock:
            self._prune(now)
            if suggestion_id in self._finalized:
                return False
            pending = self._pending.get(suggestion_id)
            if pending is None:
                raise UnknownSuggestion(suggestion_id)
            # Log first: a record that cannot be persisted must not train.
            self._append_record(pending, reward=reward, stars=stars)
            del self._pending[suggestion_id]
            self.policy.update(pending.context, pending.arm_id, pending.propensity, reward)
            self._finalized[suggestion_id] = now
            self.feedback_count += 1
            self.stars_total += stars
            return True

    def clarify_answer(self, session_id: str, term: str, answer: str) -> ClarifyOutcome:
        if answer not in ("yes", "no"):
            raise ValidationError(f"answer must be 'yes' or 'no', got {answer!r}")
        with self._lock:
            state = self._clarify.get(session_id)
            if state is None or state.filter.term != term:
                raise NoActiveClarification(session_id)
            try:
                remaining = clar.apply_filter(state.candidates, state.filter, answer)
            except ContradictionError:
                del self._clarify[session_id]
                raise
            if self.config.context_feedback and answer == "yes":
                session = self._sessions.get(session_id) or Session(session_id)
                self._sessions[session_id] = session.with_utterance(term)
            if len(remaining) <= self.config.clarifier.max_resolved:
                del self._clarify[session_id]
                return ClarifyOutcome(
                    remaining_count=len(remaining),
                    resolved_answer=self._render_resolved(remaining),
                )
            next_filter = clar.best_filter(remaining)
            if next_filter is None:
                # Nothing splits the survivors further; hand them over.
                del self._clarify[session_id]
                return ClarifyOutcome(
                    remaining_count=len(remaining),
                    resolved_answer=self._render_resolved(remaining),
                )
            self._clarify[session_id] = _ClarifyState(candidates=remaining, filter=next_filter)
            return ClarifyOutcome(
                remaining_count=len(remaining),
                next_question=clar.render_question(next_filter),
            )

    def _render_resolved(self, remaining: CandidateSet) -> str:
        parts = []
        for doc_id in remaining.doc_ids:
            doc = self.corpus.document(doc_id) if self.corpus else None
            parts.append(f"{doc.title}\n{doc.body}" if doc else doc_id)
        return "\n\n".join(parts)

    def stats(self) -> dict:
        with self._lock:
            count = self.feedback_count
            return {
                "rounds": count,
                "pulls": [int(p) for p in self.policy.pulls],
                "mean_stars": self.stars_total / count if count else None,
                "policy_name": self.policy.policy_name,
                "uptime_seconds": time.monotonic() - self._started,
            }

    def arm_listing(self) -> list[dict]:
        return [
            {"arm_id": d.arm_id, "name": d.name, "kind": d.kind.value}
            for d in self.registry.arms
        ]

    # -- persistence -------------------------------------------------------

    def save_snapshot(self) -> None:
        path = self.config.snapshot_path
        if not path:
            return
        with self._lock:
            blob = self.policy.snapshot()
        tmp = f"{path}.tmp"
        with open(tmp, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)

    def load_snapshot(self) -> bool:
        path = self.config.snapshot_path
        if not path or not os.path.exists(path):
            return False
        with open(path, "rb") as fh:
            blob = fh.read()
        restored = PolicyState.restore(blob)
        if restored.dimension != self.policy.dimension or restored.num_arms != len(
            self.registry
        ):
            raise RestoreError(
                "snapshot shape does not match the configured arms/featurizer"
            )
        with self._lock:
            self.policy = restored
        return True


def create_app(config: ServiceConfig | None = None, engine: SuggestEngine | None = None):
    """FastAPI application over a SuggestEngine.

    Every endpoint requires ``Authorization: Bearer <token>``.  Error
    mapping: 401 bad token, 404 unknown ids, 409 contradiction, 422 invalid
    values, 503 no arm or log failure.
    """
    if engine is None:
        if config is None:
            raise ValidationError("create_app needs a config or an engine")
        engine = SuggestEngine(config)
    return _build_app(engine)


class SuggestRequest(BaseModel):
    session_id: str
    utterance: str


class FeedbackRequest(BaseModel):
    suggestion_id: str
    stars: int


class ClarifyRequest(BaseModel):
    session_id: str
    term: str
    answer: str


def _build_app(engine: SuggestEngine):
    @contextlib.asynccontextmanager
    async def lifespan(_app):
        try:
            engine.load_snapshot()
        except RestoreError:
            # A stale or foreign snapshot must not block startup.
            pass
        yield
        engine.save_snapshot()

    app = FastAPI(title="agentbuddy", lifespan=lifespan)
    app.state.engine = engine

    def authorized(request: Request) -> None:
        header = request.headers.get("authorization", "")
        if header != f"Bearer {engine.config.token}":
            raise HTTPException(status_code=401, detail="invalid token")

    @app.post("/v1/suggest", dependencies=[Depends(authorized)])
    def post_suggest(body: SuggestRequest):
        try:
            suggestion = engine.suggest(body.session_id, body.utterance)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except AllArmsUnavailable as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        except LogWriteError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        arm = engine.registry.descriptor(suggestion.arm_id)
        payload = {
            "suggestion_id": suggestion.suggestion_id,
            "arm_id": suggestion.arm_id,
            "arm_name": arm.name,
            "answer_text": suggestion.answer_text,
            "highlights": [list(span) for span in suggestion.highlights],
            "propensity": suggestion.propensity,
        }
        if suggestion.clarifying_question is not None:
            payload["clarifying_question"] = suggestion.clarifying_question
        return payload

    @app.post("/v1/feedback", dependencies=[Depends(authorized)])
    def post_feedback(body: FeedbackRequest):
        try:
            updated = engine.feedback(body.suggestion_id, body.stars)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except UnknownSuggestion as exc:
            raise HTTPException(status_code=404, detail="unknown or expired suggestion") from exc
        except LogWriteError as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from exc
        return {"ok": True, "updated": updated}

    @app.post("/v1/clarify/answer", dependencies=[Depends(authorized)])
    def post_clarify(body: ClarifyRequest):
        try:
            outcome = engine.clarify_answer(body.session_id, body.term, body.answer)
        except ValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except NoActiveClarification as exc:
            raise HTTPException(status_code=404, detail="no active clarification") from exc
        except ContradictionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        payload = {"remaining_count": outcome.remaining_count}
        if outcome.next_question is not None:
            payload["next_question"] = outcome.next_question
        if outcome.resolved_answer is not None:
            payload["resolved_answer"] = outcome.resolved_answer
        return payload

    @app.get("/v1/stats", dependencies=[Depends(authorized)])
    def get_stats():
        return engine.stats()

    @app.get("/v1/arms", dependencies=[Depends(authorized)])
    def get_arms():
        return {"arms": engine.arm_listing()}

    return app
