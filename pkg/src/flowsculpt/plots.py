"""Figure rendering for run artifacts.

Renders straight from the artifact tables (episode log, window stats, unique
state counts, solution table) into PNG files next to them, using the Agg
backend so no display is needed.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .artifacts import RunArtifacts


def _rolling_mean(values: np.ndarray, window: int) -> np.ndarray:
    if len(values) < window:
        return np.array([])
    kernel = np.full(window, 1.0 / window)
    return np.convolve(values, kernel, mode="valid")


def render_run_plots(artifacts: RunArtifacts, out_dir) -> list[Path]:
    """Write rewards/success/unique-states/solutions figures; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    rewards = np.array([log.reward for log in artifacts.episodes], dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4))
    if rewards.size:
        ax.plot(rewards, lw=0.4, alpha=0.35, color="tab:gray", label="episode reward")
        window = min(100, max(1, rewards.size // 10))
        smooth = _rolling_mean(rewards, window)
        if smooth.size:
            ax.plot(np.arange(window - 1, rewards.size), smooth,
                    color="tab:blue", label=f"rolling mean ({window})")
        ax.legend(loc="lower right")
    ax.set_xlabel("episode")
    ax.set_ylabel("total reward")
    ax.set_title("Episode reward")
    written.append(_save(fig, out / "rewards.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    if artifacts.windows:
        xs = [w.start_episode for w in artifacts.windows]
        ys = [w.frequency for w in artifacts.windows]
        ax.plot(xs, ys, marker="o", ms=3, color="tab:green")
        ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("window start episode")
    ax.set_ylabel("success frequency")
    ax.set_title("Success rate per episode window")
    written.append(_save(fig, out / "success.png"))

    fig, ax = plt.subplots(figsize=(7, 4))
    if artifacts.unique_counts:
        ax.plot(artifacts.unique_counts, color="tab:orange")
    ax.set_xlabel("episode")
    ax.set_ylabel("distinct shapes seen")
    ax.set_title("Cumulative unique states")
    written.append(_save(fig, out / "unique_states.png"))

    top = artifacts.solutions.top(10)
    fig, ax = plt.subplots(figsize=(7, 4))
    if top:
        labels = [" ".join(str(a) for a in seq) for seq, _ in top]
        counts = [count for _, count in top]
        ypos = np.arange(len(top))[::-1]
        ax.barh(ypos, counts, color="tab:purple")
        ax.set_yticks(ypos)
        ax.set_yticklabels(labels, fontsize=8)
    ax.set_xlabel("times discovered")
    ax.set_title("Most frequent successful sequences")
    written.append(_save(fig, out / "solutions.png"))
    return written


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
