"""Frozen-policy evaluation over fresh episode seeds.

Policies act by their deterministic heads (argmax or distribution mean), the
generator/distributor pair stays out of the loop since synthetic rewards are
a training signal, and episodes are independent, so they can fan out over a
thread pool (size from the DAGMARL_THREADS environment variable).  Results
are keyed by episode index, so thread scheduling cannot reorder them.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .metrics import histogram
from .seeding import substream
from .training import Trainer


@dataclass(frozen=True)
class EvalResult:
    rewards: np.ndarray
    goal_periods: np.ndarray
    counts: np.ndarray
    edges: np.ndarray
    summary: dict


def thread_count() -> int:
    raw = os.environ.get("DAGMARL_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"DAGMARL_THREADS must be an integer, got {raw!r}")
    return max(count, 1)


def evaluate(config, checkpoint_dir, episodes: int = 1000, seed=None,
             bins: int = 30) -> EvalResult:
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if seed is None:
        seed = config.seed
    stream = substream(seed, "eval-env")
    env_seeds = [int(s) for s in stream.integers(2 ** 63, size=episodes)]
    rewards = np.empty(episodes)
    periods = np.empty(episodes, dtype=int)

    def run_chunk(indices):
        # one trainer (and env) per worker: nets are only read, envs are not
        trainer = Trainer(config)
        trainer.load_checkpoints(checkpoint_dir)
        for i in indices:
            record = trainer.run_episode(i, env_seed=env_seeds[i],
                                         frozen=True)
            rewards[i] = record.team_reward
            periods[i] = record.goal_periods

    workers = min(thread_count(), episodes)
    if workers == 1:
        run_chunk(range(episodes))
    else:
        chunks = [range(k, episodes, workers) for k in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for future in [pool.submit(run_chunk, c) for c in chunks]:
                future.result()

    counts, edges = histogram(rewards, bins=bins)
    summary = {
        "episodes": episodes,
        "mean": float(rewards.mean()),
        "median": float(np.median(rewards)),
        "std": float(rewards.std()),
        "min": float(rewards.min()),
        "max": float(rewards.max()),
    }
    return EvalResult(rewards, periods, counts, edges, summary)
