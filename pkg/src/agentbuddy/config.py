"""Key-value configuration for the service and the synthetic environment.

Format: one ``key = value`` per line, ``#`` starts a comment line, blank
lines ignored.  Dotted keys group settings (``policy.epsilon = 0.1``).
Relative paths resolve against the config file's directory.

Environment overrides: ``AGENTBUDDY_<KEY>`` beats the file, with the prefix
stripped, the rest lowercased, and ``__`` standing in for the dot
(``AGENTBUDDY_POLICY__EPSILON=0.2`` sets ``policy.epsilon``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from .core import ValidationError
from .featurizer import FeaturizerConfig
from .policies import PolicyConfig

ENV_PREFIX = "AGENTBUDDY_"

# The featurizer dataclass default (2**18) sizes hashing for text alone; a
# service also pays d*d per arm for the policy, so the service default is
# a compact 512 unless the config says otherwise.
SERVICE_DIMENSION_DEFAULT = 512

_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


class ConfigError(ValueError):
    """Config file unreadable, malformed, or semantically invalid."""


def parse_kv(text: str, source: str = "<config>") -> dict[str, str]:
    """Parse the key-value format; later duplicates win."""
    out: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source} line {number}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"{source} line {number}: empty key")
        out[key] = value.strip()
    return out


def apply_env_overrides(values: dict[str, str], environ=None) -> dict[str, str]:
    environ = os.environ if environ is None else environ
    merged = dict(values)
    for name, value in environ.items():
        if name.startswith(ENV_PREFIX) and len(name) > len(ENV_PREFIX):
            key = name[len(ENV_PREFIX) :].lower().replace("__", ".")
            merged[key] = value
    return merged


def _coerce_int(values: dict[str, str], key: str, default: int) -> int:
    if key not in values:
        return default
    try:
        return int(values[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected integer, got {values[key]!r}") from exc


def _coerce_float(values: dict[str, str], key: str, default: float) -> float:
    if key not in values:
        return default
    try:
        return float(values[key])
    except ValueError as exc:
        raise ConfigError(f"{key}: expected number, got {values[key]!r}") from exc


def _coerce_bool(values: dict[str, str], key: str, default: bool) -> bool:
    if key not in values:
        return default
    token = values[key].lower()
    if token in _TRUE:
        return True
    if token in _FALSE:
        return False
    raise ConfigError(f"{key}: expected boolean, got {values[key]!r}")


_SERVICE_KEYS = frozenset(
    {
        "host", "port", "token", "corpus", "faq", "log", "snapshot",
        "feedback_ttl", "context_feedback",
        "policy.name", "policy.epsilon", "policy.alpha", "policy.ridge",
        "policy.thompson_scale", "policy.propensity_floor",
        "policy.thompson_resamples", "policy.seed",
        "featurizer.dimension", "featurizer.ngram_max",
        "featurizer.history_decay", "featurizer.lowercase",
        "clarifier.near_ratio", "clarifier.min_near",
        "clarifier.margin_ratio", "clarifier.candidate_pool",
        "clarifier.max_resolved",
    }
)

_ENV_SPEC_KEYS = frozenset({"kind", "arms", "dimension", "clusters", "noise", "seed"})


def _filter_overrides(
    values: dict[str, str], known, environ, allow_remote: bool = False
) -> dict[str, str]:
    """File keys are strict; environment overrides apply only where the key
    is recognized, so unrelated AGENTBUDDY_ variables cannot break startup."""
    merged = apply_env_overrides(values, environ)
    return {
        k: v
        for k, v in merged.items()
        if k in values
        or k in known
        or (allow_remote and k.startswith("arm.remote."))
    }


@dataclass(frozen=True)
class ClarifierConfig:
    near_ratio: float = 0.5
    min_near: int = 4
    margin_ratio: float = 0.1
    candidate_pool: int = 20
    max_resolved: int = 3


@dataclass(frozen=True)
class ServiceConfig:
    token: str
    host: str = "127.0.0.1"
    port: int = 8080
    corpus_path: str | None = None
    faq_path: str | None = None
    log_path: str = "interactions.jsonl"
    snapshot_path: str | None = None
    feedback_ttl_seconds: float = 86400.0
    context_feedback: bool = True
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    featurizer: FeaturizerConfig = field(
        default_factory=lambda: FeaturizerConfig(dimension=SERVICE_DIMENSION_DEFAULT)
    )
    clarifier: ClarifierConfig = field(default_factory=ClarifierConfig)
    remote_arms: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not self.token:
            raise ConfigError("token must be non-empty")
        if self.feedback_ttl_seconds <= 0:
            raise ConfigError("feedback_ttl must be positive")

    @classmethod
    def from_mapping(cls, values: dict[str, str], base_dir: str = ".") -> ServiceConfig:
        remote = []
        for key in sorted(values):
            if key.startswith("arm.remote."):
                name = key[len("arm.remote.") :]
                if not name:
                    raise ConfigError("arm.remote.<name> requires a name")
                remote.append((name, values[key]))
            elif key not in _SERVICE_KEYS:
                raise ConfigError(f"unknown config key {key!r}")

        def path(key: str):
            if key not in values:
                return None
            value = values[key]
            return value if os.path.isabs(value) else os.path.join(base_dir, value)

        try:
            policy = PolicyConfig(
                name=values.get("policy.name", PolicyConfig.name),
                epsilon=_coerce_float(values, "policy.epsilon", PolicyConfig.epsilon),
                alpha=_coerce_float(values, "policy.alpha", PolicyConfig.alpha),
                ridge=_coerce_float(values, "policy.ridge", PolicyConfig.ridge),
                thompson_scale=_coerce_float(
                    values, "policy.thompson_scale", PolicyConfig.thompson_scale
                ),
                propensity_floor=_coerce_float(
                    values, "policy.propensity_floor", PolicyConfig.propensity_floor
                ),
                thompson_resamples=_coerce_int(
                    values, "policy.thompson_resamples", PolicyConfig.thompson_resamples
                ),
                seed=_coerce_int(values, "policy.seed", PolicyConfig.seed),
            )
            featurizer = FeaturizerConfig(
                dimension=_coerce_int(
                    values, "featurizer.dimension", SERVICE_DIMENSION_DEFAULT
                ),
                ngram_max=_coerce_int(values, "featurizer.ngram_max", 2),
                history_decay=_coerce_float(values, "featurizer.history_decay", 0.5),
                lowercase=_coerce_bool(values, "featurizer.lowercase", True),
            )
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc
        clarifier = ClarifierConfig(
            near_ratio=_coerce_float(values, "clarifier.near_ratio", 0.5),
            min_near=_coerce_int(values, "clarifier.min_near", 4),
            margin_ratio=_coerce_float(values, "clarifier.margin_ratio", 0.1),
            candidate_pool=_coerce_int(values, "clarifier.candidate_pool", 20),
            max_resolved=_coerce_int(values, "clarifier.max_resolved", 3),
        )
        log_value = values.get("log", "interactions.jsonl")
        log_path = (
            log_value if os.path.isabs(log_value) else os.path.join(base_dir, log_value)
        )
        return cls(
            token=values.get("token", ""),
            host=values.get("host", "127.0.0.1"),
            port=_coerce_int(values, "port", 8080),
            corpus_path=path("corpus"),
            faq_path=path("faq"),
            log_path=log_path,
            snapshot_path=path("snapshot"),
            feedback_ttl_seconds=_coerce_float(values, "feedback_ttl", 86400.0),
            context_feedback=_coerce_bool(values, "context_feedback", True),
            policy=policy,
            featurizer=featurizer,
            clarifier=clarifier,
            remote_arms=tuple(remote),
        )

    @classmethod
    def from_file(cls, path: str | os.PathLike, environ=None) -> ServiceConfig:
        """Load, apply environment overrides, and validate referenced paths."""
        path = os.fspath(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values = _filter_overrides(
            parse_kv(text, source=path), _SERVICE_KEYS, environ, allow_remote=True
        )
        config = cls.from_mapping(values, base_dir=os.path.dirname(os.path.abspath(path)))
        for label, p in (("corpus", config.corpus_path), ("faq", config.faq_path)):
            if p is not None and not os.path.exists(p):
                raise ConfigError(f"{label} path does not exist: {p}")
        return config


@dataclass(frozen=True)
class EnvSpec:
    """Synthetic environment description for the simulate command."""

    kind: str = "linear"
    num_arms: int = 10
    dimension: int = 32
    num_clusters: int = 8
    noise: float = 0.1
    seed: int = 0

    @classmethod
    def from_file(cls, path: str | os.PathLike, environ=None) -> EnvSpec:
        path = os.fspath(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read env spec {path}: {exc}") from exc
        values = _filter_overrides(parse_kv(text, source=path), _ENV_SPEC_KEYS, environ)
        for key in values:
            if key not in _ENV_SPEC_KEYS:
                raise ConfigError(f"unknown env key {key!r}")
        spec = cls(
            kind=values.get("kind", "linear"),
            num_arms=_coerce_int(values, "arms", 10),
            dimension=_coerce_int(values, "dimension", 32),
            num_clusters=_coerce_int(values, "clusters", 8),
            noise=_coerce_float(values, "noise", 0.1),
            seed=_coerce_int(values, "seed", 0),
        )
        if spec.kind not in ("linear", "clustered"):
            raise ConfigError(f"unknown env kind {spec.kind!r}")
        return spec

    def build(self):
        from .simulator import build_env

        return build_env(
            num_arms=self.num_arms,
            dimension=self.dimension,
            num_clusters=self.num_clusters,
            noise=self.noise,
            seed=self.seed,
            kind=self.kind,
        )
