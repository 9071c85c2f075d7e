"""Episode runners and training loops connecting learners to an arena."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .arena import Arena
from .learning import (DDPG_PRESETS, DDQN_PRESETS, PPO_PRESETS, DdpgAgent, DdpgConfig, DdqnAgent,
                       DdqnConfig, PpoAgent, PpoConfig, RolloutBuffer, fedavg_networks)
from .learning.checkpoint import decode_state, encode_state
from .uncertainty import body_seed

ALGOS = ("ppo", "ddqn", "ddpg")


def episode_seed(seed: int, episode: int) -> int:
    return body_seed(seed, f"episode:{episode}")


@dataclass
class EpisodeRecord:
    episode: int
    seed: int
    steps: int
    rewards: dict
    summary: dict = field(default_factory=dict)

    def row(self, agents) -> dict:
        out = {"episode": self.episode, "seed": self.seed, "steps": self.steps}
        out.update({f"reward_{a}": self.rewards.get(a, 0.0) for a in agents})
        out.update(self.summary)
        return out


def _summary_tracker(arena: Arena):
    """Per-episode mission metrics accumulated from step infos."""
    state = {}

    def update(infos: dict) -> None:
        for a, info in infos.items():
            if "a_error_m" in info:
                state["final_a_error_m"] = info["a_error_m"]
                state["success"] = bool(info.get("success", False))
            if "poc" in info:
                state["final_poc"] = info["poc"]
                if info.get("tca_s", 0.0) > 0:
                    # last prediction whose look-ahead still contains the encounter
                    state["poc_at_tca"] = info["poc"]
            if "anomaly_penalty" in info:
                state["anomaly_penalty"] = info["anomaly_penalty"]
            if "thrust_n" in info:
                state[f"thrust_{a}"] = state.get(f"thrust_{a}", 0.0) + info["thrust_n"]
            if "r_target_m" in info:
                state["final_r_error_m"] = info["r_target_m"]

    return state, update


# --- policies ----------------------------------------------------------------

def noop_action(arena: Arena, agent: str) -> np.ndarray:
    lo, hi = arena.action_space(agent)
    return np.clip(np.zeros_like(lo), lo, hi)


def noop_policy(arena: Arena, observations: dict) -> dict:
    return {a: noop_action(arena, a) for a in arena.agents}


def learner_policy(learners: dict, deterministic: bool = True, rng: Optional[np.random.Generator] = None):
    """Acting function for trained learners, one per agent name."""
    rng = rng if rng is not None else np.random.default_rng(0)

    def policy(arena: Arena, observations: dict) -> dict:
        out = {}
        for a in arena.agents:
            lr = learners[a]
            obs = observations[a]
            if lr.kind == "ddqn":
                out[a] = arena.mission.discrete_action(a, lr.act(obs, rng, greedy=deterministic))
            else:
                out[a] = lr.act(obs, rng, deterministic)[0]
        return out

    return policy


def check_compatible(arena: Arena, learners: dict) -> None:
    """Raises ValueError when a learner does not fit its agent's spaces."""
    for a in arena.possible_agents:
        if a not in learners:
            raise ValueError(f"no policy for agent {a!r}")
        lr = learners[a]
        if lr.obs_dim != arena.observation_arity(a):
            raise ValueError(f"policy for {a!r} expects {lr.obs_dim} observations, "
                             f"mission provides {arena.observation_arity(a)}")
        if lr.kind == "ddqn":
            table = getattr(arena.mission, "DISCRETE_ACTIONS", None)
            if table is None or len(table) != lr.n_actions:
                raise ValueError(f"mission {arena.mission.id!r} has no {lr.n_actions}-entry discrete action table")
        else:
            lo, _ = arena.action_space(a)
            if lr.act_dim != len(lo):
                raise ValueError(f"policy for {a!r} emits {lr.act_dim} actions, expected {len(lo)}")


def run_episode(arena: Arena, policy: Callable, seed: int, episode: int = 0,
                on_step: Optional[Callable] = None) -> EpisodeRecord:
    """One episode under ``policy``; ``on_step(step, outcome)`` sees every transition."""
    obs = arena.reset(seed)
    totals = {a: 0.0 for a in arena.possible_agents}
    summary, track = _summary_tracker(arena)
    steps = 0
    while not arena.done:
        out = arena.step(policy(arena, obs))
        steps += 1
        for a, r in out.rewards.items():
            totals[a] += r
        track(out.infos)
        if on_step is not None:
            on_step(steps, out)
        obs = {a: out.observations[a] for a in arena.agents}
    return EpisodeRecord(episode, seed, steps, totals, dict(summary))


# --- learners ----------------------------------------------------------------

def default_config(algo: str, mission_id: str):
    if algo == "ppo":
        return PPO_PRESETS.get(mission_id, PpoConfig())
    if algo == "ddqn":
        return DDQN_PRESETS.get(mission_id, DdqnConfig())
    if algo == "ddpg":
        return DDPG_PRESETS.get(mission_id, DdpgConfig())
    raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")


def config_from_dict(algo: str, d: dict):
    cls = {"ppo": PpoConfig, "ddqn": DdqnConfig, "ddpg": DdpgConfig}.get(algo)
    if cls is None:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    return cls.from_dict(d)


def make_learners(arena: Arena, algo: str, config=None, seed: int = 0) -> dict:
    config = config if config is not None else default_config(algo, arena.mission.id)
    out = {}
    for a in arena.possible_agents:
        rng = np.random.default_rng(body_seed(seed, f"init:{a}"))
        obs_dim = arena.observation_arity(a)
        if algo == "ddqn":
            table = getattr(arena.mission, "DISCRETE_ACTIONS", None)
            if table is None:
                raise ValueError(f"ddqn needs a discrete action table; mission {arena.mission.id!r} has none")
            out[a] = DdqnAgent(obs_dim, len(table), config, rng)
        elif algo == "ppo":
            lo, hi = arena.action_space(a)
            out[a] = PpoAgent(obs_dim, lo, hi, config, rng)
        elif algo == "ddpg":
            lo, hi = arena.action_space(a)
            out[a] = DdpgAgent(obs_dim, lo, hi, config, rng)
        else:
            raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGOS}")
    return out


def _finite_obs(x) -> np.ndarray:
    return np.nan_to_num(np.asarray(x, dtype=float), nan=0.0, posinf=0.0, neginf=0.0)


class Trainer:
    """Collects experience with exploration and updates one learner per agent.

    ``fedavg_every`` (episodes) averages actor and critic parameters across
    agents, weighted by the experience each has gathered since the last
    aggregation.
    """

    def __init__(self, arena: Arena, learners: dict, seed: int = 0, fedavg_every: Optional[int] = None):
        check_compatible(arena, learners)
        self.arena = arena
        self.learners = learners
        self.seed = int(seed)
        self.fedavg_every = fedavg_every
        self.rng = np.random.default_rng(body_seed(seed, "train"))
        self.episode = 0
        self.rollouts = {a: RolloutBuffer() for a in learners}
        self.experience = {a: 0 for a in learners}
        self.diagnostics: list = []

    def _act(self, obs: dict) -> tuple[dict, dict]:
        actions, extras = {}, {}
        for a in self.arena.agents:
            lr = self.learners[a]
            o = _finite_obs(obs[a])
            lr.observe(o)
            if lr.kind == "ddqn":
                idx = lr.act(o, self.rng)
                actions[a] = self.arena.mission.discrete_action(a, idx)
                extras[a] = (o, idx, None)
            elif lr.kind == "ppo":
                env_a, raw, logp = lr.act(o, self.rng)
                actions[a] = env_a
                extras[a] = (o, raw, logp)
            else:
                env_a, raw = lr.act(o, self.rng)
                actions[a] = env_a
                extras[a] = (o, raw, None)
        return actions, extras

    def _learn(self, agent: str, o, a, logp, r, o2, term: bool, end: bool) -> None:
        lr = self.learners[agent]
        self.experience[agent] += 1
        if lr.kind == "ppo":
            buf = self.rollouts[agent]
            buf.add(o, a, logp, r, o2, term, end)
            if len(buf) >= lr.config.rollout:
                diag = lr.update(buf.batch(lr.config.gamma, lr.config.gae_lambda), self.rng)
                self.diagnostics.append({"episode": self.episode, "agent": agent, **diag})
                buf.clear()
        else:
            lr.store(o, a, r, o2, term)
            lr.learn(self.rng)

    def run_episode(self) -> EpisodeRecord:
        arena = self.arena
        seed = episode_seed(self.seed, self.episode)
        obs = arena.reset(seed)
        for lr in self.learners.values():
            if lr.kind == "ddpg":
                lr.reset_noise()
        totals = {a: 0.0 for a in arena.possible_agents}
        summary, track = _summary_tracker(arena)
        steps = 0
        while not arena.done:
            actions, extras = self._act(obs)
            out = arena.step(actions)
            steps += 1
            track(out.infos)
            for a, (o, act, logp) in extras.items():
                r = out.rewards[a]
                totals[a] += r
                term, trunc = out.terminated[a], out.truncated[a]
                self._learn(a, o, act, logp, r, _finite_obs(out.observations[a]), term, term or trunc)
            obs = {a: out.observations[a] for a in arena.agents}
        for buf in self.rollouts.values():
            buf.mark_end()
        record = EpisodeRecord(self.episode, seed, steps, totals, dict(summary))
        self.episode += 1
        if self.fedavg_every and len(self.learners) > 1 and self.episode % self.fedavg_every == 0:
            self.aggregate()
        return record

    def aggregate(self) -> None:
        names = list(self.learners)
        sizes = [max(self.experience[a], 1) for a in names]
        first = self.learners[names[0]]
        for attr in ("actor", "critic", "online"):
            if hasattr(first, attr):
                fedavg_networks([getattr(self.learners[a], attr) for a in names], sizes)
        self.experience = {a: 0 for a in names}

    def train(self, episodes: int, callback: Optional[Callable] = None) -> list:
        records = []
        for _ in range(int(episodes)):
            rec = self.run_episode()
            records.append(rec)
            if callback is not None:
                callback(rec)
        return records

    def state(self) -> dict:
        """JSON-ready snapshot, including partially filled on-policy rollouts."""
        return {"episode": self.episode, "seed": self.seed, "rng": self.rng.bit_generator.state,
                "experience": dict(self.experience),
                "rollouts": {a: encode_state(b.state()) for a, b in self.rollouts.items()}}

    def load(self, st: dict) -> None:
        self.episode = int(st["episode"])
        self.rng.bit_generator.state = st["rng"]
        self.experience.update({k: int(v) for k, v in st.get("experience", {}).items()})
        for a, rows in st.get("rollouts", {}).items():
            if a in self.rollouts:
                self.rollouts[a].load(decode_state(rows))


def evaluate(arena: Arena, policy: Callable, seeds) -> list:
    """Episode records of ``policy`` on each seed."""
    return [run_episode(arena, policy, int(s), i) for i, s in enumerate(seeds)]


def mean_metric(records, key: str) -> float:
    vals = [r.summary[key] for r in records if key in r.summary]
    return float(np.mean(vals)) if vals else math.nan
