"""Command-line entry points: serve, simulate, replay, eval, ask."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .clarifier import ContradictionError
from .config import ConfigError, EnvSpec, ServiceConfig
from .core import ValidationError
from .evaluation import (
    EstimationError,
    LogReadError,
    ips_estimate,
    read_log,
    replay,
)
from .policies import POLICY_NAMES, PolicyConfig, PolicyState, RestoreError
from .simulator import run_simulation


def _figure_path(out_path: str) -> str:
    stem, _ = os.path.splitext(out_path)
    return f"{stem}.png"


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = ServiceConfig.from_file(args.config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def cmd_simulate(args) -> int:
    spec = EnvSpec.from_file(args.env) if args.env else EnvSpec()
    env = spec.build()
    policy = None
    if args.policy != "oracle":
        policy = PolicyConfig(name=args.policy, seed=args.seed)
    metrics = run_simulation(
        env,
        policy,
        rounds=args.rounds,
        seed=args.seed,
        csv_path=args.out,
        log_path=args.log,
    )
    if args.out and not args.no_figure:
        from .plotting import save_simulation_figure

        save_simulation_figure(_figure_path(args.out), metrics)
    print(metrics.to_json())
    return 0


def cmd_replay(args) -> int:
    config = PolicyConfig(name=args.policy, seed=args.seed)
    _, metrics = replay(args.log, config, seed=args.seed, num_arms=args.arms)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(metrics.to_json() + "\n")
        if not args.no_figure:
            from .plotting import save_replay_figure

            save_replay_figure(_figure_path(args.out), metrics)
    print(metrics.to_json())
    return 0


def cmd_eval(args) -> int:
    with open(args.target, "rb") as fh:
        target = PolicyState.restore(fh.read())
    records = read_log(args.log)
    from .evaluation import snips_estimate

    ips = ips_estimate(records, target)
    snips = snips_estimate(records, target)
    usable = sum(1 for r in records if r.reward is not None)
    print(
        json.dumps(
            {"ips": ips, "snips": snips, "records": usable},
            separators=(",", ":"),
        )
    )
    return 0


def cmd_ask(args) -> int:
    from .service import AllArmsUnavailable, SuggestEngine

    config = ServiceConfig.from_file(args.config)
    engine = SuggestEngine(config)
    try:
        suggestion = engine.suggest(args.session, args.utterance)
    except AllArmsUnavailable:
        print("no arm could answer", file=sys.stderr)
        return 1
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
    print(json.dumps(payload, separators=(",", ":")))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentbuddy",
        description="Bandit-routed answer suggestions with human feedback.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the REST service")
    serve.add_argument("--config", required=True, help="service config file")
    serve.set_defaults(func=cmd_serve)

    simulate = sub.add_parser("simulate", help="run the synthetic bandit loop")
    simulate.add_argument("--env", help="environment spec file (defaults built in)")
    simulate.add_argument(
        "--policy", required=True, choices=POLICY_NAMES + ("oracle",)
    )
    simulate.add_argument("--rounds", type=int, required=True)
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--out", help="reward curve CSV (figure lands beside it)")
    simulate.add_argument("--log", help="JSONL interaction log to write")
    simulate.add_argument("--no-figure", action="store_true")
    simulate.set_defaults(func=cmd_simulate)

    replay_p = sub.add_parser("replay", help="re-run a policy over a logged run")
    replay_p.add_argument("--log", required=True)
    replay_p.add_argument("--policy", required=True, choices=POLICY_NAMES)
    replay_p.add_argument("--seed", type=int, default=0)
    replay_p.add_argument("--arms", type=int, help="arm count (default: from log)")
    replay_p.add_argument("--out", help="metrics JSON (figure lands beside it)")
    replay_p.add_argument("--no-figure", action="store_true")
    replay_p.set_defaults(func=cmd_replay)

    eval_p = sub.add_parser("eval", help="off-policy estimates against a snapshot")
    eval_p.add_argument("--log", required=True)
    eval_p.add_argument("--target", required=True, help="policy snapshot file")
    eval_p.set_defaults(func=cmd_eval)

    ask = sub.add_parser("ask", help="one-shot local suggest (debugging)")
    ask.add_argument("--utterance", required=True)
    ask.add_argument("--config", required=True)
    ask.add_argument("--session", default="cli")
    ask.set_defaults(func=cmd_ask)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (
        ConfigError,
        ValidationError,
        LogReadError,
        EstimationError,
        RestoreError,
        ContradictionError,
        OSError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
