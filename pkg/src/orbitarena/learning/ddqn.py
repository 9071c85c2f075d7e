"""Double deep Q-network with ε-greedy exploration and a replay buffer."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from ..errors import NumericalError
from .buffers import ReplayBuffer
from .mlp import Adam, Mlp, soft_update
from .noise import StepDecay


@dataclass(frozen=True)
class DdqnConfig:
    lr: float = 5e-5
    epochs: int = 1
    gamma: float = 0.95
    tau: float = 0.001
    capacity: int = 10000
    epsilon_initial: float = 0.5
    epsilon_decay_every: int = 1000
    epsilon_decay_amount: float = 0.05
    epsilon_min: float = 0.05
    batch_size: int = 256
    target_update_every: int = 10
    hidden: tuple = (512, 256)
    prioritized: bool = False
    max_grad_norm: Optional[float] = 10.0

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @classmethod
    def from_dict(cls, d: dict) -> "DdqnConfig":
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ValueError(f"unknown DDQN hyperparameters: {unknown}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


DDQN_PRESETS = {"cam": DdqnConfig()}


def epsilon_greedy(q_values, epsilon: float, rng: np.random.Generator) -> int:
    """Uniform random index with probability ε, else the first maximizing index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    q = np.asarray(q_values, dtype=float)
    if rng.random() < epsilon:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


def ddqn_targets(rewards, dones, q_next_online, q_next_target, gamma: float) -> np.ndarray:
    """y = r + γ(1 − done)·Q_target(s', argmax_a Q_online(s', a))."""
    best = np.argmax(np.atleast_2d(q_next_online), axis=1)
    q_eval = np.atleast_2d(q_next_target)[np.arange(len(best)), best]
    return np.asarray(rewards, dtype=float) + gamma * (1.0 - np.asarray(dones, dtype=float)) * q_eval


def ddqn_loss(online: Mlp, states, actions, targets):
    """Mean of (y − Q(s, a))², parameter gradients and per-sample TD errors."""
    q, cache = online.forward(np.atleast_2d(states), cache=True)
    idx = np.asarray(actions, dtype=int).reshape(-1)
    rows = np.arange(len(idx))
    td = np.asarray(targets, dtype=float) - q[rows, idx]
    g = np.zeros_like(q)
    g[rows, idx] = -2.0 * td / len(idx)
    grads, _ = online.backward(cache, g)
    return float(np.mean(td * td)), grads, td


class DdqnAgent:
    kind = "ddqn"

    def __init__(self, obs_dim: int, n_actions: int, config: DdqnConfig = DdqnConfig(),
                 rng: Optional[np.random.Generator] = None):
        self.config = config
        self.obs_dim, self.n_actions = int(obs_dim), int(n_actions)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.online = Mlp([obs_dim, *config.hidden, n_actions], "linear", rng)
        self.target = self.online.copy()
        self.opt = Adam(self.online.params, config.lr, max_grad_norm=config.max_grad_norm)
        self.buffer = ReplayBuffer(config.capacity, obs_dim, 1, prioritized=config.prioritized)
        self.epsilon_schedule = StepDecay(config.epsilon_initial, config.epsilon_decay_amount,
                                          config.epsilon_decay_every, config.epsilon_min)
        self.steps = 0
        self.updates = 0

    @property
    def epsilon(self) -> float:
        return self.epsilon_schedule(self.steps)

    def observe(self, obs) -> None:
        self.online.normalizer.update(obs)

    def act(self, obs, rng: np.random.Generator, greedy: bool = False) -> int:
        q = self.online(np.asarray(obs, dtype=float))
        if greedy:
            return int(np.argmax(q))
        a = epsilon_greedy(q, self.epsilon, rng)
        self.steps += 1
        return a

    def store(self, s, a, r, s2, done) -> None:
        self.buffer.add(s, [a], r, s2, done)

    def learn(self, rng: np.random.Generator) -> Optional[float]:
        """One gradient step per epoch on a sampled batch; None until the buffer is warm."""
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return None
        losses = []
        for _ in range(cfg.epochs):
            idx, (s, a, r, s2, d) = self.buffer.sample(cfg.batch_size, rng)
            y = ddqn_targets(r, d, self.online(s2), self.target(s2), cfg.gamma)
            loss, grads, td = ddqn_loss(self.online, s, a[:, 0], y)
            if not (np.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads)):
                raise NumericalError(f"non-finite DDQN loss {loss}")
            self.opt.step(self.online.params, grads)
            if cfg.prioritized:
                self.buffer.update_priorities(idx, td)
            self.updates += 1
            if self.updates % cfg.target_update_every == 0:
                soft_update(self.target, self.online, cfg.tau)
            losses.append(loss)
        return float(np.mean(losses))

    def state(self) -> dict:
        return {"networks": {"online": self.online, "target": self.target},
                "optimizers": {"online": self.opt.state()},
                "counters": {"steps": self.steps, "updates": self.updates},
                "config": self.config.to_dict(), "buffer": self.buffer.state()}

    def load(self, st: dict) -> None:
        self.online.assign(st["networks"]["online"])
        self.target.assign(st["networks"]["target"])
        self.opt.load(st["optimizers"]["online"])
        self.steps = int(st["counters"]["steps"])
        self.updates = int(st["counters"]["updates"])
        if "buffer" in st:
            self.buffer.load(st["buffer"])
