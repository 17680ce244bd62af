"""Headless matplotlib figures rendered next to the delimited outputs."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ReplayMetrics
from .simulator import SimulationMetrics


def save_simulation_figure(path: str | os.PathLike, metrics: SimulationMetrics) -> None:
    """Cumulative reward and regret curves plus the per-arm pull counts."""
    rounds = np.arange(1, metrics.rounds + 1)
    reward = np.cumsum(metrics.per_round_reward)
    regret = np.cumsum(metrics.per_round_regret)
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 7))
    top.plot(rounds, reward, label="cumulative reward")
    top.plot(rounds, regret, label="cumulative regret")
    top.set_xlabel("round")
    top.set_ylabel("cumulative value")
    top.legend(loc="upper left")
    top.grid(True, alpha=0.3)
    arms = np.arange(len(metrics.pulls))
    bottom.bar(arms, metrics.pulls)
    bottom.set_xlabel("arm")
    bottom.set_ylabel("pulls")
    bottom.set_xticks(arms)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_replay_figure(path: str | os.PathLike, metrics: ReplayMetrics) -> None:
    """Per-arm pulls reconstructed by the replay."""
    arms = np.arange(len(metrics.pulls))
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(arms, metrics.pulls)
    ax.set_xlabel("arm")
    ax.set_ylabel("pulls")
    ax.set_xticks(arms)
    ax.set_title(
        f"replay: {metrics.matched_rounds}/{metrics.total_rounds} rounds matched"
    )
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
