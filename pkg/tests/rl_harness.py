"""Training-and-evaluation runs behind the behavioural RL acceptance checks."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from orbitarena.arena import Arena
from orbitarena.presets import preset_document
from orbitarena.training import Trainer, learner_policy, make_learners, noop_policy, run_episode

EVAL_SEED_OFFSET = 10_000


@dataclass
class RunResult:
    seed: int
    episodes: int
    evaluations: list = field(default_factory=list)  # (episode, metric)
    wall_s: float = 0.0

    @property
    def best(self) -> float:
        return min((m for ep, m in self.evaluations if ep > 0), default=math.inf)

    @property
    def final(self) -> float:
        return self.evaluations[-1][1] if self.evaluations else math.inf

    @property
    def initial(self) -> float:
        return self.evaluations[0][1] if self.evaluations and self.evaluations[0][0] == 0 else math.nan


def evaluate_metric(arena: Arena, learners: dict, key: str, seeds) -> float:
    """Mean of a summary metric under the deterministic policy."""
    policy = learner_policy(learners, deterministic=True)
    vals = [run_episode(arena, policy, int(s)).summary.get(key, math.inf) for s in seeds]
    return float(np.mean(vals))


def train_and_evaluate(mission: str, algo: str, seed: int, episodes: int, eval_every: int, key: str,
                       eval_episodes: int = 1, target: float = -math.inf, eval_initial: bool = False,
                       log=None) -> RunResult:
    """Train from scratch, evaluating the deterministic policy every ``eval_every`` episodes.

    Stops early once an evaluation falls below ``target``. With ``eval_initial`` the
    untrained policy is evaluated too, recorded as episode 0.
    """
    arena = Arena.from_document(preset_document(mission))
    learners = make_learners(arena, algo, seed=seed)
    trainer = Trainer(arena, learners, seed=seed)
    eval_arena = Arena.from_document(preset_document(mission))
    eval_seeds = [EVAL_SEED_OFFSET + 97 * seed + k for k in range(eval_episodes)]
    result = RunResult(seed, 0)
    t0 = time.perf_counter()
    if eval_initial:
        result.evaluations.append((0, evaluate_metric(eval_arena, learners, key, eval_seeds)))
    for ep in range(1, episodes + 1):
        trainer.run_episode()
        result.episodes = ep
        if ep % eval_every == 0 or ep == episodes:
            metric = evaluate_metric(eval_arena, learners, key, eval_seeds)
            result.evaluations.append((ep, metric))
            if log is not None:
                log(f"{mission} {algo} seed={seed} episode={ep} {key}={metric:.6g} "
                    f"elapsed={time.perf_counter() - t0:.0f}s")
            if metric < target:
                break
    result.wall_s = time.perf_counter() - t0
    return result


def noop_metric(mission: str, key: str, seeds) -> float:
    arena = Arena.from_document(preset_document(mission))
    return float(np.mean([run_episode(arena, noop_policy, int(s)).summary.get(key, math.inf) for s in seeds]))
