"""Replay memory, on-policy rollouts and generalized advantage estimation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class ReplayBuffer:
    """Ring buffer of (s, a, r, s', done) with optional proportional priorities."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, prioritized: bool = False,
                 alpha: float = 0.6, eps: float = 1e-6):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros((capacity, act_dim))
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.prioritized = prioritized
        self.alpha, self.eps = float(alpha), float(eps)
        self.priority = np.ones(capacity)
        self.size = 0
        self.pos = 0

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s2, done) -> None:
        i = self.pos
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = s, a, r, s2, float(done)
        self.priority[i] = self.priority[:self.size].max() if self.size else 1.0
        self.pos = (self.pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator):
        """Indices and (s, a, r, s', done) arrays of a random batch."""
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} items, fewer than batch size {batch_size}")
        if self.prioritized:
            p = self.priority[:self.size] ** self.alpha
            idx = rng.choice(self.size, size=batch_size, p=p / p.sum())
        else:
            idx = rng.integers(0, self.size, size=batch_size)
        return idx, (self.s[idx], self.a[idx], self.r[idx], self.s2[idx], self.done[idx])

    def update_priorities(self, idx, td_errors) -> None:
        self.priority[idx] = np.abs(np.asarray(td_errors, dtype=float)) + self.eps

    def state(self) -> dict:
        n = self.size
        return {"capacity": self.capacity, "pos": self.pos, "size": n, "s": self.s[:n].copy(),
                "a": self.a[:n].copy(), "r": self.r[:n].copy(), "s2": self.s2[:n].copy(),
                "done": self.done[:n].copy(), "priority": self.priority[:n].copy()}

    def load(self, st: dict) -> None:
        n = int(st["size"])
        for key in ("s", "a", "r", "s2", "done", "priority"):
            getattr(self, key)[:n] = np.asarray(st[key], dtype=float).reshape(getattr(self, key)[:n].shape)
        self.size, self.pos = n, int(st["pos"])


def gae_advantages(rewards, values, gamma: float, lam: float, dones=None,
                   next_values: Optional[np.ndarray] = None) -> np.ndarray:
    """Â_t = δ_t + γλ(1 − d_t)Â_{t+1} with δ_t = r_t + γ(1 − d_t)V(s_{t+1}) − V(s_t).

    ``values`` has one more entry than ``rewards`` (the bootstrap value).
    ``next_values`` overrides V(s_{t+1}) per step, for rollouts that contain
    truncated episodes. A done flag also cuts the recursion.
    """
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    n = len(r)
    if len(v) != n + 1:
        raise ValueError("values must include the bootstrap value V(s_T)")
    d = np.zeros(n) if dones is None else np.asarray(dones, dtype=float)
    nv = v[1:] if next_values is None else np.asarray(next_values, dtype=float)
    cut = np.zeros(n) if dones is None else d
    delta = r + gamma * (1.0 - d) * nv - v[:-1]
    adv = np.zeros(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = delta[t] + gamma * lam * (1.0 - cut[t]) * acc
        adv[t] = acc
    return adv


def gae_direct(rewards, values, gamma: float, lam: float) -> np.ndarray:
    """Â_t = Σ_l (γλ)^l δ_{t+l} evaluated as an explicit double sum."""
    r = np.asarray(rewards, dtype=float)
    v = np.asarray(values, dtype=float)
    n = len(r)
    delta = [r[t] + gamma * v[t + 1] - v[t] for t in range(n)]
    return np.array([sum((gamma * lam) ** l * delta[t + l] for l in range(n - t)) for t in range(n)])


@dataclass
class TrajectoryBatch:
    """On-policy rollout; advantages and returns are filled in by the learner."""

    states: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray          # terminal: no bootstrap
    ends: np.ndarray           # terminal or truncated: recursion cut
    next_states: np.ndarray
    gamma: float = 0.99
    lam: float = 0.95
    values: Optional[np.ndarray] = None
    advantages: Optional[np.ndarray] = None
    returns: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.rewards)
        for name in ("states", "actions", "log_probs", "dones", "ends", "next_states"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length differs from rewards")

    def __len__(self) -> int:
        return len(self.rewards)

    def compute_advantages(self, critic) -> None:
        """Refresh values, advantages and returns with the current critic."""
        v = np.asarray(critic(self.states), dtype=float).reshape(-1)
        v_next = np.asarray(critic(self.next_states), dtype=float).reshape(-1)
        r, d, e = self.rewards, self.dones, self.ends
        delta = r + self.gamma * (1.0 - d) * v_next - v
        adv = np.zeros(len(r))
        acc = 0.0
        for t in range(len(r) - 1, -1, -1):
            acc = delta[t] + self.gamma * self.lam * (1.0 - e[t]) * acc
            adv[t] = acc
        self.values, self.advantages, self.returns = v, adv, adv + v


class RolloutBuffer:
    """Accumulates on-policy steps until a training batch is full."""

    def __init__(self):
        self.clear()

    def clear(self) -> None:
        self._rows = {k: [] for k in ("s", "a", "logp", "r", "done", "end", "s2")}

    def __len__(self) -> int:
        return len(self._rows["r"])

    def add(self, s, a, logp, r, s2, done, end) -> None:
        for k, x in zip(("s", "a", "logp", "r", "s2", "done", "end"), (s, a, logp, r, s2, done, end)):
            self._rows[k].append(x)

    def mark_end(self) -> None:
        """Cut the advantage recursion at the last stored step (episode boundary)."""
        if self._rows["end"]:
            self._rows["end"][-1] = True

    def state(self) -> dict:
        return {k: [np.array(x, dtype=float) for x in v] for k, v in self._rows.items()}

    def load(self, st: dict) -> None:
        self.clear()
        for k in self._rows:
            self._rows[k] = [np.array(x, dtype=float) for x in st.get(k, [])]

    def batch(self, gamma: float, lam: float) -> TrajectoryBatch:
        rows = self._rows
        return TrajectoryBatch(np.array(rows["s"], dtype=float), np.array(rows["a"], dtype=float),
                               np.array(rows["logp"], dtype=float), np.array(rows["r"], dtype=float),
                               np.array(rows["done"], dtype=float), np.array(rows["end"], dtype=float),
                               np.array(rows["s2"], dtype=float), gamma, lam)
