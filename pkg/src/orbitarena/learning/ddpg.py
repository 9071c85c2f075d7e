"""Deep deterministic policy gradient with Ornstein-Uhlenbeck exploration."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Optional

import numpy as np

from ..errors import NumericalError
from .buffers import ReplayBuffer
from .mlp import Adam, Mlp, soft_update
from .noise import OuNoise


@dataclass(frozen=True)
class DdpgConfig:
    actor_lr: float = 1e-5
    critic_lr: float = 1e-4
    epochs: int = 1
    gamma: float = 0.99
    tau: float = 0.01
    ou_mu: float = 0.0
    ou_sigma: float = 0.2
    ou_theta: float = 0.15
    ou_dt: float = 0.01
    capacity: int = 10000
    batch_size: int = 256
    hidden: tuple = (512, 256)
    max_grad_norm: Optional[float] = 10.0

    def __post_init__(self):
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @classmethod
    def from_dict(cls, d: dict) -> "DdpgConfig":
        unknown = sorted(set(d) - {f.name for f in fields(cls)})
        if unknown:
            raise ValueError(f"unknown DDPG hyperparameters: {unknown}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


DDPG_PRESETS = {"kolosa_transfer": DdpgConfig()}


def ddpg_targets(rewards, dones, next_states, actor_target: Mlp, critic_target: Mlp, gamma: float):
    """y = r + γ(1 − done)·Q⁻(s', π⁻(s'))."""
    s2 = np.atleast_2d(next_states)
    q = critic_target(np.hstack([s2, actor_target(s2)]))[:, 0]
    return np.asarray(rewards, dtype=float) + gamma * (1.0 - np.asarray(dones, dtype=float)) * q


def ddpg_critic_loss(critic: Mlp, states, actions, targets):
    q, cache = critic.forward(np.hstack([np.atleast_2d(states), np.atleast_2d(actions)]), cache=True)
    err = q[:, 0] - np.asarray(targets, dtype=float)
    grads, _ = critic.backward(cache, (2.0 * err / len(err))[:, None])
    return float(np.mean(err * err)), grads


def ddpg_actor_loss(actor: Mlp, critic: Mlp, states):
    """−mean Q(s, π(s)) and its gradient with respect to the actor parameters."""
    s = np.atleast_2d(states)
    a, a_cache = actor.forward(s, cache=True)
    q, q_cache = critic.forward(np.hstack([s, a]), cache=True)
    _, g_in = critic.backward(q_cache, np.full((len(s), 1), -1.0 / len(s)))
    grads, _ = actor.backward(a_cache, g_in[:, s.shape[1]:])
    return -float(np.mean(q)), grads


def _finite(loss, grads) -> bool:
    return bool(np.isfinite(loss)) and all(np.all(np.isfinite(g)) for g in grads)


class DdpgAgent:
    """Actor with Tanh output in [-1, 1]; the critic takes the state-action concatenation."""

    kind = "ddpg"

    def __init__(self, obs_dim: int, low, high, config: DdpgConfig = DdpgConfig(),
                 rng: Optional[np.random.Generator] = None):
        self.config = config
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.obs_dim, self.act_dim = int(obs_dim), len(self.low)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.actor = Mlp([obs_dim, *config.hidden, self.act_dim], "tanh", rng)
        self.critic = Mlp([obs_dim + self.act_dim, *config.hidden, 1], "linear", rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.actor_opt = Adam(self.actor.params, config.actor_lr, max_grad_norm=config.max_grad_norm)
        self.critic_opt = Adam(self.critic.params, config.critic_lr, max_grad_norm=config.max_grad_norm)
        self.noise = OuNoise(self.act_dim, config.ou_mu, config.ou_sigma, config.ou_theta, config.ou_dt)
        self.buffer = ReplayBuffer(config.capacity, obs_dim, self.act_dim)
        self.steps = 0
        self.updates = 0

    def to_env(self, raw) -> np.ndarray:
        u = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
        return self.low + 0.5 * (u + 1.0) * (self.high - self.low)

    def observe(self, obs) -> None:
        self.actor.normalizer.update(obs)
        raw = self.actor(np.atleast_2d(obs))
        self.critic.normalizer.update(np.hstack([np.atleast_2d(obs), raw]))

    def reset_noise(self) -> None:
        self.noise.reset()

    def act(self, obs, rng: np.random.Generator, deterministic: bool = False):
        """(environment action, raw action in [-1, 1])."""
        raw = self.actor(np.asarray(obs, dtype=float))
        if not deterministic:
            raw = np.clip(raw + self.noise(rng), -1.0, 1.0)
            self.steps += 1
        return self.to_env(raw), raw

    def store(self, s, raw_action, r, s2, done) -> None:
        self.buffer.add(s, raw_action, r, s2, done)

    def learn(self, rng: np.random.Generator) -> Optional[dict]:
        cfg = self.config
        if len(self.buffer) < cfg.batch_size:
            return None
        out = []
        for _ in range(cfg.epochs):
            _, (s, a, r, s2, d) = self.buffer.sample(cfg.batch_size, rng)
            y = ddpg_targets(r, d, s2, self.actor_target, self.critic_target, cfg.gamma)
            c_loss, c_grads = ddpg_critic_loss(self.critic, s, a, y)
            if not _finite(c_loss, c_grads):
                raise NumericalError(f"non-finite DDPG critic loss {c_loss}")
            self.critic_opt.step(self.critic.params, c_grads)
            a_loss, a_grads = ddpg_actor_loss(self.actor, self.critic, s)
            if not _finite(a_loss, a_grads):
                raise NumericalError(f"non-finite DDPG actor loss {a_loss}")
            self.actor_opt.step(self.actor.params, a_grads)
            soft_update(self.actor_target, self.actor, cfg.tau)
            soft_update(self.critic_target, self.critic, cfg.tau)
            self.updates += 1
            out.append((c_loss, a_loss))
        c, a_ = np.mean(out, axis=0)
        return {"critic_loss": float(c), "actor_loss": float(a_)}

    def state(self) -> dict:
        return {"networks": {"actor": self.actor, "critic": self.critic, "actor_target": self.actor_target,
                             "critic_target": self.critic_target},
                "optimizers": {"actor": self.actor_opt.state(), "critic": self.critic_opt.state()},
                "counters": {"steps": self.steps, "updates": self.updates},
                "config": self.config.to_dict(), "low": self.low, "high": self.high,
                "noise": self.noise.state.x, "buffer": self.buffer.state()}

    def load(self, st: dict) -> None:
        for name in ("actor", "critic", "actor_target", "critic_target"):
            getattr(self, name).assign(st["networks"][name])
        self.actor_opt.load(st["optimizers"]["actor"])
        self.critic_opt.load(st["optimizers"]["critic"])
        self.steps = int(st["counters"]["steps"])
        self.updates = int(st["counters"]["updates"])
        if "noise" in st:
            self.noise.state = replace(self.noise.state, x=np.asarray(st["noise"], dtype=float))
        if "buffer" in st:
            self.buffer.load(st["buffer"])
