"""Append-only interaction logging, off-policy estimators, and deterministic
replay.

The log is JSONL with a fixed field order so golden files are byte-stable.
Propensities are already floored at logging time by the policy engine, so the
estimators divide without re-clipping.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .core import FeatureVector, InteractionRecord, ValidationError
from .policies import PolicyConfig, PolicyState, policy_rng

# Serialized field order.  seed_state_digest rides last so the documented
# prefix stays stable.
_FIELDS = (
    "ordinal",
    "ts",
    "session_id",
    "context",
    "arm_id",
    "propensity",
    "reward",
    "policy_name",
    "stars",
    "seed_state_digest",
)


class LogReadError(ValueError):
    """A log line failed to parse; carries the 1-based line number."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class LogWriteError(OSError):
    """Appending to the log failed; the record was not persisted."""


class EstimationError(ValueError):
    """No usable records (or zero total weight) for the requested estimate."""


def serialize_record(ordinal: int, record: InteractionRecord) -> str:
    """One JSONL line, fixed field order, no trailing newline."""
    ctx = record.context
    idx = sorted(ctx.entries)
    payload = {
        "ordinal": ordinal,
        "ts": record.ts,
        "session_id": record.session_id,
        "context": {
            "dim": ctx.dimension,
            "idx": idx,
            "val": [ctx.entries[i] for i in idx],
        },
        "arm_id": record.arm_id,
        "propensity": record.propensity,
        "reward": record.reward,
        "policy_name": record.policy_name,
        "stars": record.stars,
        "seed_state_digest": record.seed_state_digest,
    }
    assert tuple(payload) == _FIELDS
    return json.dumps(payload, separators=(",", ":"))


def parse_record(line: str) -> tuple[int, InteractionRecord]:
    """Inverse of serialize_record.  Raises ValueError on malformed input."""
    payload = json.loads(line)
    ctx = payload["context"]
    entries = {int(i): float(v) for i, v in zip(ctx["idx"], ctx["val"])}
    if len(entries) != len(ctx["idx"]) or len(ctx["idx"]) != len(ctx["val"]):
        raise ValueError("context idx/val mismatch")
    context = FeatureVector(dimension=int(ctx["dim"]), entries=entries)
    record = InteractionRecord(
        session_id=payload["session_id"],
        ts=int(payload["ts"]),
        context=context,
        arm_id=int(payload["arm_id"]),
        propensity=float(payload["propensity"]),
        reward=None if payload["reward"] is None else float(payload["reward"]),
        policy_name=payload["policy_name"],
        stars=None if payload.get("stars") is None else int(payload["stars"]),
        seed_state_digest=payload.get("seed_state_digest"),
    )
    return int(payload["ordinal"]), record


class InteractionLog:
    """Append-only JSONL log.  Single appender; ordinals continue across
    reopen."""

    def __init__(self, path: str | os.PathLike):
        self.path = os.fspath(path)
        self._count = 0
        if os.path.exists(self.path):
            with open(self.path, "r", encoding="utf-8") as fh:
                self._count = sum(1 for line in fh if line.strip())

    def __len__(self) -> int:
        return self._count

    def append(self, record: InteractionRecord) -> int:
        ordinal = self._count
        line = serialize_record(ordinal, record)
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
                fh.flush()
                os.fsync(fh.fileno())
        except OSError as exc:
            raise LogWriteError(f"cannot append to {self.path}: {exc}") from exc
        self._count += 1
        return ordinal

    def records(self):
        """Yield (ordinal, record) pairs; raises LogReadError with the
        offending 1-based line number."""
        if not os.path.exists(self.path):
            return
        with open(self.path, "r", encoding="utf-8") as fh:
            for number, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    yield parse_record(line)
                except (ValueError, KeyError, TypeError) as exc:
                    raise LogReadError(number, str(exc)) from exc


def read_log(path: str | os.PathLike) -> list[InteractionRecord]:
    # Reading history that does not exist is a caller error; only the
    # writer treats a missing file as the fresh state.
    if not os.path.exists(os.fspath(path)):
        raise FileNotFoundError(f"log file not found: {os.fspath(path)}")
    return [record for _, record in InteractionLog(path).records()]


def _target_actions(records, target: PolicyState) -> list[int]:
    arms = range(target.num_arms)
    return [target.greedy_action(r.context, arms) for r in records]


def _usable(records) -> list[InteractionRecord]:
    usable = [r for r in records if r.reward is not None]
    for r in usable:
        if r.propensity <= 0.0:
            raise ValidationError(f"non-positive propensity {r.propensity}")
    return usable


def ips_estimate(records, target: PolicyState) -> float:
    """Inverse-propensity estimate of the target's value over rewarded
    records: (1/m) sum r_i 1[target(x_i) = a_i] / p_i.

    The target acts deterministically (greedy_action), so the match
    indicator needs no inner sampling.
    """
    usable = _usable(records)
    if not usable:
        raise EstimationError("no records with rewards")
    actions = _target_actions(usable, target)
    total = sum(
        r.reward / r.propensity
        for r, a in zip(usable, actions)
        if r.arm_id == a
    )
    return total / len(usable)


def snips_estimate(records, target: PolicyState) -> float:
    """Self-normalized IPS: (sum r_i w_i) / (sum w_i), bounded by the matched
    rewards' range."""
    usable = _usable(records)
    if not usable:
        raise EstimationError("no records with rewards")
    actions = _target_actions(usable, target)
    weighted = 0.0
    weight = 0.0
    for r, a in zip(usable, actions):
        if r.arm_id == a:
            w = 1.0 / r.propensity
            weighted += r.reward * w
            weight += w
    if weight <= 0.0:
        raise EstimationError("zero total weight: target never matches the log")
    return weighted / weight


@dataclass(frozen=True)
class ReplayMetrics:
    total_rounds: int
    matched_rounds: int
    updates_applied: int
    pulls: tuple[int, ...]
    mean_matched_reward: float
    snapshot_digest: str

    def to_json(self) -> str:
        payload = {
            "total_rounds": self.total_rounds,
            "matched_rounds": self.matched_rounds,
            "updates_applied": self.updates_applied,
            "pulls": list(self.pulls),
            "mean_matched_reward": self.mean_matched_reward,
            "snapshot_digest": self.snapshot_digest,
        }
        return json.dumps(payload, separators=(",", ":"))


def replay(
    log_path: str | os.PathLike,
    config: PolicyConfig,
    seed: int,
    num_arms: int | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[PolicyState, ReplayMetrics]:
    """Re-run the online loop over logged contexts in arrival order.

    Each record replays one choose(); when the replayed choice matches the
    logged arm and a reward is present, that reward updates the state (other
    rounds' rewards were never observed for the replayed choice).  With the
    config and seed that produced the log, every round matches and the
    replay reproduces the original pull counts.
    """
    if not os.path.exists(os.fspath(log_path)):
        raise FileNotFoundError(f"log file not found: {os.fspath(log_path)}")
    log = InteractionLog(log_path)
    pairs = list(log.records())
    if num_arms is None:
        num_arms = max((r.arm_id for _, r in pairs), default=0) + 1
    dimension = pairs[0][1].context.dimension if pairs else 1
    if rng is None:
        rng = policy_rng(seed)
    state = PolicyState(config, dimension, num_arms, rng=rng)
    arms = range(num_arms)
    matched = 0
    updates = 0
    matched_reward = 0.0
    for _, record in pairs:
        chosen, propensity = state.choose(record.context, arms)
        if chosen != record.arm_id:
            continue
        matched += 1
        if record.reward is not None:
            state.update(record.context, chosen, propensity, record.reward)
            updates += 1
            matched_reward += record.reward
    metrics = ReplayMetrics(
        total_rounds=len(pairs),
        matched_rounds=matched,
        updates_applied=updates,
        pulls=tuple(int(p) for p in state.pulls),
        mean_matched_reward=matched_reward / updates if updates else 0.0,
        snapshot_digest=state.snapshot_digest(),
    )
    return state, metrics
