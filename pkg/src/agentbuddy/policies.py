"""Contextual-bandit policies: uniform, epsilon-greedy, LinUCB-style upper
confidence, and linear Thompson sampling.

Each arm keeps a ridge-regression state A_a = lambda*I + sum x x^T and
b_a = sum r x.  A_a is maintained as a rank-one-updated Cholesky factor, so
choosing costs triangular solves instead of inversions and positive
definiteness holds by construction.  Propensities are floored at
``propensity_floor`` so downstream importance weights stay bounded.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .core import FeatureVector, ValidationError

POLICY_NAMES = ("uniform", "epsilon_greedy", "linucb", "lin_thompson")

SNAPSHOT_FORMAT_VERSION = 1

# Run-level seeds fan out into named substreams so the policy's draws stay
# aligned no matter what the environment samples (stream 0 is the env's).
POLICY_STREAM = 1


def policy_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, POLICY_STREAM]))


class NoArmAvailable(Exception):
    """choose() was called with an empty set of available arms."""


class RestoreError(ValueError):
    """Snapshot bytes are corrupt or structurally invalid."""


@dataclass(frozen=True)
class PolicyConfig:
    name: str = "epsilon_greedy"
    epsilon: float = 0.05
    alpha: float = 0.5
    ridge: float = 1.0
    thompson_scale: float = 0.25
    propensity_floor: float = 0.01
    thompson_resamples: int = 100
    seed: int = 0

    def __post_init__(self) -> None:
        if self.name not in POLICY_NAMES:
            raise ValidationError(f"unknown policy {self.name!r}; expected one of {POLICY_NAMES}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValidationError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.ridge <= 0.0:
            raise ValidationError("ridge prior must be positive")
        if not 0.0 < self.propensity_floor <= 1.0:
            raise ValidationError("propensity_floor must be in (0, 1]")
        if self.thompson_resamples < 1:
            raise ValidationError("thompson_resamples must be >= 1")
        if self.alpha < 0.0 or self.thompson_scale < 0.0:
            raise ValidationError("alpha and thompson_scale must be non-negative")


def cholesky_rank1_update(chol: np.ndarray, x: np.ndarray) -> None:
    """In-place update of lower-triangular ``chol`` so L L^T gains + x x^T."""
    x = x.copy()
    n = chol.shape[0]
    for k in range(n):
        lkk = chol[k, k]
        r = math.hypot(lkk, x[k])
        c = r / lkk
        s = x[k] / lkk
        chol[k, k] = r
        if k + 1 < n:
            chol[k + 1 :, k] = (chol[k + 1 :, k] + s * x[k + 1 :]) / c
            x[k + 1 :] = c * x[k + 1 :] - s * chol[k + 1 :, k]


class PolicyState:
    """Per-arm linear state plus the policy's own RNG stream.

    All mutation goes through update(); choose() only advances the RNG.
    ``A(a)`` materializes lambda*I + sum x x^T for inspection.
    """

    def __init__(
        self,
        config: PolicyConfig,
        dimension: int,
        num_arms: int,
        rng: np.random.Generator | None = None,
    ):
        if dimension < 1:
            raise ValidationError("dimension must be positive")
        if num_arms < 1:
            raise ValidationError("num_arms must be >= 1")
        self.config = config
        self.dimension = dimension
        self.num_arms = num_arms
        root = math.sqrt(config.ridge)
        self._chol = [np.eye(dimension) * root for _ in range(num_arms)]
        self._b = [np.zeros(dimension) for _ in range(num_arms)]
        self._theta = [np.zeros(dimension) for _ in range(num_arms)]
        self.pulls = np.zeros(num_arms, dtype=np.int64)
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)

    @property
    def policy_name(self) -> str:
        return self.config.name

    def A(self, arm_id: int) -> np.ndarray:
        chol = self._chol[arm_id]
        return chol @ chol.T

    def b(self, arm_id: int) -> np.ndarray:
        return self._b[arm_id].copy()

    def theta(self, arm_id: int) -> np.ndarray:
        """Ridge mean A_a^-1 b_a (cached, refreshed on update)."""
        return self._theta[arm_id].copy()

    def cholesky(self, arm_id: int) -> np.ndarray:
        return self._chol[arm_id].copy()

    # -- internals ---------------------------------------------------------

    def _dense_context(self, context: FeatureVector) -> np.ndarray:
        if context.dimension != self.dimension:
            raise ValidationError(
                f"context dimension {context.dimension} != policy dimension {self.dimension}"
            )
        return context.to_dense()

    def _check_arms(self, available_arms) -> list[int]:
        arms = sorted(set(int(a) for a in available_arms))
        if not arms:
            raise NoArmAvailable("no arms available")
        for a in arms:
            if not 0 <= a < self.num_arms:
                raise ValidationError(f"unknown arm {a}")
        return arms

    def _mean_scores(self, x: np.ndarray, arms: list[int]) -> np.ndarray:
        return np.array([float(self._theta[a] @ x) for a in arms])

    def _widths(self, x: np.ndarray, arms: list[int]) -> np.ndarray:
        # sqrt(x^T A^-1 x) = ||L^-1 x||
        out = np.empty(len(arms))
        for j, a in enumerate(arms):
            u = solve_triangular(self._chol[a], x, lower=True, check_finite=False)
            out[j] = math.sqrt(float(u @ u))
        return out

    def _thompson_mc(
        self, means: np.ndarray, spreads: np.ndarray, rng: np.random.Generator, draws: int
    ) -> np.ndarray:
        """Empirical argmax frequencies over ``draws`` resamples.

        Per-arm sampled scores are theta_a.x + v*||L_a^-1 x||*g, which is the
        exact distribution of thetã_a.x under thetã_a ~ N(theta_a, v^2 A_a^-1).
        """
        g = rng.standard_normal((draws, len(means)))
        samples = means[None, :] + spreads[None, :] * g
        winners = np.argmax(samples, axis=1)
        counts = np.bincount(winners, minlength=len(means))
        return counts / draws

    # -- operations --------------------------------------------------------

    def action_distribution(
        self,
        context: FeatureVector,
        available_arms,
        rng: np.random.Generator | None = None,
    ) -> dict[int, float]:
        """Selection probabilities over the available arms; sums to 1.

        lin_thompson estimates its distribution by Monte-Carlo resampling
        (advancing ``rng``, or this state's own stream when none is given);
        the other policies are closed-form.
        """
        arms = self._check_arms(available_arms)
        x = self._dense_context(context)
        k = len(arms)
        name = self.config.name
        if name == "uniform":
            return {a: 1.0 / k for a in arms}
        if name == "epsilon_greedy":
            eps = self.config.epsilon
            means = self._mean_scores(x, arms)
            greedy = arms[int(np.argmax(means))]
            dist = {a: eps / k for a in arms}
            dist[greedy] += 1.0 - eps
            return dist
        means = self._mean_scores(x, arms)
        widths = self._widths(x, arms)
        if name == "linucb":
            chosen = arms[int(np.argmax(means + self.config.alpha * widths))]
            return {a: 1.0 if a == chosen else 0.0 for a in arms}
        # lin_thompson
        rng = rng if rng is not None else self.rng
        freqs = self._thompson_mc(
            means, self.config.thompson_scale * widths, rng, self.config.thompson_resamples
        )
        return {a: float(freqs[j]) for j, a in enumerate(arms)}

    def choose(
        self,
        context: FeatureVector,
        available_arms,
        rng: np.random.Generator | None = None,
    ) -> tuple[int, float]:
        """Pick an arm and return it with the propensity to log.

        uniform / epsilon_greedy sample their distribution; linucb takes its
        argmax with propensity 1.0; lin_thompson samples per-arm scores and
        logs a Monte-Carlo propensity estimate.  Sampled propensities are
        floored at ``propensity_floor``.
        """
        arms = self._check_arms(available_arms)
        x = self._dense_context(context)
        rng = rng if rng is not None else self.rng
        floor = self.config.propensity_floor
        name = self.config.name

        if name in ("uniform", "epsilon_greedy"):
            dist = self.action_distribution(context, arms)
            draw = rng.random()
            cumulative = 0.0
            chosen = arms[-1]
            for a in arms:
                cumulative += dist[a]
                if draw < cumulative:
                    chosen = a
                    break
            return chosen, max(floor, dist[chosen])

        means = self._mean_scores(x, arms)
        widths = self._widths(x, arms)
        if name == "linucb":
            chosen = arms[int(np.argmax(means + self.config.alpha * widths))]
            return chosen, 1.0

        # lin_thompson: one sampled selection, then a propensity estimate
        spreads = self.config.thompson_scale * widths
        scores = means + spreads * rng.standard_normal(len(arms))
        chosen_index = int(np.argmax(scores))
        freqs = self._thompson_mc(means, spreads, rng, self.config.thompson_resamples)
        return arms[chosen_index], max(floor, float(freqs[chosen_index]))

    def greedy_action(self, context: FeatureVector, available_arms) -> int:
        """Deterministic argmax action, used when this state is an off-policy
        evaluation target.  uniform degenerates to the lowest arm id;
        lin_thompson evaluates at its posterior mean."""
        arms = self._check_arms(available_arms)
        x = self._dense_context(context)
        name = self.config.name
        if name == "uniform":
            return arms[0]
        if name == "linucb":
            scores = self._mean_scores(x, arms) + self.config.alpha * self._widths(x, arms)
            return arms[int(np.argmax(scores))]
        return arms[int(np.argmax(self._mean_scores(x, arms)))]

    def update(
        self,
        context: FeatureVector,
        arm_id: int,
        propensity: float,
        reward: float | None,
    ) -> PolicyState:
        """Apply one observed reward: A_a += x x^T, b_a += r x, pulls += 1.

        A missing reward (None) leaves the state untouched.  The propensity
        is validated and retained only for logging; updates are unweighted.
        """
        if not 0 <= arm_id < self.num_arms:
            raise ValidationError(f"unknown arm {arm_id}")
        if not 0.0 < propensity <= 1.0:
            raise ValidationError(f"propensity must be in (0, 1], got {propensity}")
        if reward is None:
            return self
        if not 0.0 <= reward <= 1.0:
            raise ValidationError(f"reward must be in [0, 1], got {reward}")
        x = self._dense_context(context)
        cholesky_rank1_update(self._chol[arm_id], x)
        self._b[arm_id] += reward * x
        chol = self._chol[arm_id]
        half = solve_triangular(chol, self._b[arm_id], lower=True, check_finite=False)
        self._theta[arm_id] = solve_triangular(chol.T, half, lower=False, check_finite=False)
        self.pulls[arm_id] += 1
        return self

    # -- persistence -------------------------------------------------------

    def snapshot(self) -> bytes:
        """Serialize to a versioned, byte-stable JSON container."""

        def encode(arr: np.ndarray) -> str:
            return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode("ascii")

        payload = {
            "format_version": SNAPSHOT_FORMAT_VERSION,
            "policy_name": self.config.name,
            "d": self.dimension,
            "K": self.num_arms,
            "hyper": {
                "epsilon": self.config.epsilon,
                "alpha": self.config.alpha,
                "ridge": self.config.ridge,
                "thompson_scale": self.config.thompson_scale,
                "propensity_floor": self.config.propensity_floor,
                "thompson_resamples": self.config.thompson_resamples,
                "seed": self.config.seed,
            },
            "pulls": [int(p) for p in self.pulls],
            "arms": [
                {"chol": encode(self._chol[a]), "b": encode(self._b[a])}
                for a in range(self.num_arms)
            ],
            "rng": self.rng.bit_generator.state,
        }
        return json.dumps(payload, separators=(",", ":")).encode("utf-8")

    def snapshot_digest(self) -> str:
        return hashlib.sha256(self.snapshot()).hexdigest()

    @classmethod
    def restore(cls, blob: bytes) -> PolicyState:
        """Rebuild a state whose future behavior matches the snapshotted one."""
        try:
            payload = json.loads(blob.decode("utf-8"))
            if payload["format_version"] != SNAPSHOT_FORMAT_VERSION:
                raise RestoreError(f"unsupported format_version {payload['format_version']}")
            hyper = payload["hyper"]
            config = PolicyConfig(
                name=payload["policy_name"],
                epsilon=hyper["epsilon"],
                alpha=hyper["alpha"],
                ridge=hyper["ridge"],
                thompson_scale=hyper["thompson_scale"],
                propensity_floor=hyper["propensity_floor"],
                thompson_resamples=hyper["thompson_resamples"],
                seed=hyper["seed"],
            )
            d, k = int(payload["d"]), int(payload["K"])
            state = cls(config, d, k)
            pulls = payload["pulls"]
            arms = payload["arms"]
            if len(pulls) != k or len(arms) != k:
                raise RestoreError("arm count mismatch")
            for a in range(k):
                chol = np.frombuffer(base64.b64decode(arms[a]["chol"]), dtype="<f8")
                vec = np.frombuffer(base64.b64decode(arms[a]["b"]), dtype="<f8")
                if chol.size != d * d or vec.size != d:
                    raise RestoreError("array shape mismatch")
                state._chol[a] = chol.reshape(d, d).copy()
                state._b[a] = vec.copy()
                half = solve_triangular(
                    state._chol[a], state._b[a], lower=True, check_finite=False
                )
                state._theta[a] = solve_triangular(
                    state._chol[a].T, half, lower=False, check_finite=False
                )
                state.pulls[a] = int(pulls[a])
            bit_generator = payload["rng"]["bit_generator"]
            generator = np.random.Generator(getattr(np.random, bit_generator)())
            generator.bit_generator.state = payload["rng"]
            state.rng = generator
            return state
        except RestoreError:
            raise
        except (ValueError, KeyError, TypeError, AttributeError, IndexError) as exc:
            raise RestoreError(f"corrupt snapshot: {exc}") from exc
