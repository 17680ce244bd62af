"""Synthetic environment for exercising the bandit loop end to end.

Contexts are noisy draws around unit-norm cluster centers.  Expected reward
is linear in the context per arm (clamped to [0, 1]), or a per-cluster table
in the deliberately misspecified "clustered" variant.  A simulated rater
turns the expected reward into a 1..5 star rating.

Environment draws and policy draws come from separate named substreams of
the run seed, so two policies run against the same seed see identical
context and rating-noise sequences.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .core import FeatureVector, InteractionRecord, ValidationError, normalize_stars
from .evaluation import InteractionLog
from .policies import PolicyConfig, PolicyState, policy_rng

ENV_STREAM = 0


def env_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, ENV_STREAM]))


@dataclass(frozen=True)
class SyntheticEnv:
    """K-arm environment over d-dimensional contexts.

    ``weights`` (K x d, rows with norm <= 1) drives the linear reward
    mu_a(x) = clamp(w_a.x, 0, 1).  When ``reward_table`` (clusters x K) is
    given instead, mu_a(x) is looked up by the nearest cluster center, which
    no linear model matches exactly.
    """

    centers: np.ndarray
    noise: float
    seed: int
    weights: np.ndarray | None = None
    reward_table: np.ndarray | None = None

    def __post_init__(self) -> None:
        if (self.weights is None) == (self.reward_table is None):
            raise ValidationError("exactly one of weights/reward_table required")
        if self.centers.ndim != 2:
            raise ValidationError("centers must be 2-d")
        norms = np.linalg.norm(self.centers, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValidationError("cluster centers must be unit-norm")
        if self.noise < 0.0:
            raise ValidationError("noise must be non-negative")
        if self.weights is not None:
            if self.weights.shape[1] != self.dimension:
                raise ValidationError("weights/centers dimension mismatch")
            if np.any(np.linalg.norm(self.weights, axis=1) > 1.0 + 1e-9):
                raise ValidationError("arm weights must have norm <= 1")
        if self.reward_table is not None:
            if self.reward_table.shape[0] != len(self.centers):
                raise ValidationError("reward_table rows must match centers")
            if np.any((self.reward_table < 0) | (self.reward_table > 1)):
                raise ValidationError("reward_table entries must be in [0, 1]")

    @property
    def num_arms(self) -> int:
        if self.weights is not None:
            return self.weights.shape[0]
        return self.reward_table.shape[1]

    @property
    def dimension(self) -> int:
        return self.centers.shape[1]

    def nearest_cluster(self, x: np.ndarray) -> int:
        return int(np.argmin(np.linalg.norm(self.centers - x, axis=1)))

    def mu(self, x: np.ndarray, arm: int) -> float:
        if not 0 <= arm < self.num_arms:
            raise ValidationError(f"arm {arm} out of range")
        if self.weights is not None:
            return float(np.clip(self.weights[arm] @ x, 0.0, 1.0))
        return float(self.reward_table[self.nearest_cluster(x), arm])

    def mu_all(self, x: np.ndarray) -> np.ndarray:
        if self.weights is not None:
            return np.clip(self.weights @ x, 0.0, 1.0)
        return self.reward_table[self.nearest_cluster(x)].copy()

    def best_arm(self, x: np.ndarray) -> int:
        return int(np.argmax(self.mu_all(x)))


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def build_env(
    num_arms: int = 10,
    dimension: int = 32,
    num_clusters: int = 8,
    noise: float = 0.1,
    seed: int = 0,
    kind: str = "linear",
) -> SyntheticEnv:
    """Draw an environment from its own seed (independent of run seeds)."""
    if num_arms < 1 or dimension < 1 or num_clusters < 1:
        raise ValidationError("num_arms, dimension, num_clusters must be positive")
    if kind not in ("linear", "clustered"):
        raise ValidationError(f"unknown env kind {kind!r}")
    rng = np.random.default_rng(seed)
    centers = _unit_rows(rng.standard_normal((num_clusters, dimension)))
    if kind == "linear":
        weights = _unit_rows(rng.standard_normal((num_arms, dimension)))
        return SyntheticEnv(centers=centers, noise=noise, seed=seed, weights=weights)
    table = rng.uniform(0.0, 1.0, size=(num_clusters, num_arms))
    return SyntheticEnv(centers=centers, noise=noise, seed=seed, reward_table=table)


def gen_context(env: SyntheticEnv, rng: np.random.Generator) -> FeatureVector:
    """Unit-norm context: a cluster center plus Gaussian noise.

    The noise block is drawn even at sigma 0 so the stream stays aligned
    across noise settings.
    """
    index = int(rng.integers(len(env.centers)))
    perturbation = rng.standard_normal(env.dimension)
    x = env.centers[index] + env.noise * perturbation
    norm = float(np.linalg.norm(x))
    if norm == 0.0:
        x, norm = env.centers[index], 1.0
    return FeatureVector.from_dense(x / norm)


def simulate_rating(
    env: SyntheticEnv, x: np.ndarray, arm: int, rng: np.random.Generator
) -> int:
    """Star rating: clamp(round(1 + 4 (mu + N(0, sigma))), 1, 5), rounding
    half up.  The noise draw happens at sigma 0 too (stream alignment)."""
    g = float(rng.standard_normal())
    value = env.mu(x, arm) + env.noise * g
    return int(min(5, max(1, math.floor(1.0 + 4.0 * value + 0.5))))


@dataclass(frozen=True)
class SimulationMetrics:
    rounds: int
    cumulative_reward: float
    cumulative_regret: float
    pulls: tuple[int, ...]
    snapshot_digest: str
    per_round_regret: tuple[float, ...] = field(repr=False, default=())
    per_round_reward: tuple[float, ...] = field(repr=False, default=())
    per_round_arm: tuple[int, ...] = field(repr=False, default=())

    def to_json(self) -> str:
        payload = {
            "rounds": self.rounds,
            "cumulative_reward": self.cumulative_reward,
            "cumulative_regret": self.cumulative_regret,
            "pulls": list(self.pulls),
            "snapshot_digest": self.snapshot_digest,
        }
        return json.dumps(payload, separators=(",", ":"))


def cumulative_regret(metrics: SimulationMetrics) -> float:
    return float(sum(metrics.per_round_regret))


def run_simulation(
    env: SyntheticEnv,
    policy_config: PolicyConfig | None,
    rounds: int,
    seed: int,
    csv_path: str | os.PathLike | None = None,
    log_path: str | os.PathLike | None = None,
) -> SimulationMetrics:
    """Run the loop: context -> choose -> rating -> normalized update.

    ``policy_config`` None plays the oracle (true best arm each round).
    Per-round regret is max_a mu_a(x) - mu_chosen(x).  Output files are
    byte-identical across runs with the same env, config, and seed: the CSV
    is `round,reward,regret,arm` and the JSONL log replays through
    evaluation.replay.
    """
    if rounds < 1:
        raise ValidationError("rounds must be >= 1")
    environment_stream = env_rng(seed)
    state: PolicyState | None = None
    if policy_config is not None:
        state = PolicyState(
            policy_config, env.dimension, env.num_arms, rng=policy_rng(seed)
        )
    log = None
    if log_path is not None:
        # Fresh log per run so the file replays to exactly this run.
        open(log_path, "w", encoding="utf-8").close()
        log = InteractionLog(log_path)
    arms = range(env.num_arms)
    pulls = np.zeros(env.num_arms, dtype=np.int64)
    rewards: list[float] = []
    regrets: list[float] = []
    chosen_arms: list[int] = []
    for i in range(rounds):
        context = gen_context(env, environment_stream)
        x = context.to_dense()
        if state is not None:
            arm, propensity = state.choose(context, arms)
        else:
            arm, propensity = env.best_arm(x), 1.0
        stars = simulate_rating(env, x, arm, environment_stream)
        reward = normalize_stars(stars)
        if state is not None:
            state.update(context, arm, propensity, reward)
        else:
            pulls[arm] += 1
        means = env.mu_all(x)
        regret = float(np.max(means) - means[arm])
        rewards.append(reward)
        regrets.append(regret)
        chosen_arms.append(arm)
        if log is not None:
            log.append(
                InteractionRecord(
                    session_id=f"sim-{i}",
                    ts=i,
                    context=context,
                    arm_id=arm,
                    propensity=propensity,
                    reward=reward,
                    policy_name=state.policy_name if state is not None else "oracle",
                    stars=stars,
                )
            )
    if state is not None:
        pulls = state.pulls.copy()
    metrics = SimulationMetrics(
        rounds=rounds,
        cumulative_reward=float(sum(rewards)),
        cumulative_regret=float(sum(regrets)),
        pulls=tuple(int(p) for p in pulls),
        snapshot_digest=state.snapshot_digest() if state is not None else "",
        per_round_regret=tuple(regrets),
        per_round_reward=tuple(rewards),
        per_round_arm=tuple(chosen_arms),
    )
    if csv_path is not None:
        write_curve_csv(csv_path, metrics)
    return metrics


def write_curve_csv(path: str | os.PathLike, metrics: SimulationMetrics) -> None:
    """Reward curve rows, one per round, deterministic float formatting."""
    lines = ["round,reward,regret,arm"]
    for i in range(metrics.rounds):
        lines.append(
            f"{i},{metrics.per_round_reward[i]!r},"
            f"{metrics.per_round_regret[i]!r},{metrics.per_round_arm[i]}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
