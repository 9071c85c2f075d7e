"""Proximal policy optimization with a fixed-σ Gaussian policy and GAE."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Optional

import numpy as np

from ..errors import NumericalError
from .buffers import TrajectoryBatch
from .mlp import Adam, Mlp
from .noise import StepDecay


@dataclass(frozen=True)
class PpoConfig:
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    gae_lambda: float = 0.95
    epochs: int = 5
    gamma: float = 0.99
    clip: float = 0.2
    sigma_initial: float = 0.5
    sigma_decay_every: int = 10000
    sigma_decay_amount: float = 0.05
    sigma_min: float = 0.05
    rollout: int = 1024
    batch_size: int = 64
    hidden: tuple = (500, 450)
    normalize_advantages: bool = True
    max_grad_norm: Optional[float] = 0.5

    def __post_init__(self):
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must lie in (0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.rollout < 1:
            raise ValueError("epochs, batch size and rollout must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @classmethod
    def from_dict(cls, d: dict) -> "PpoConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown PPO hyperparameters: {unknown}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


PPO_PRESETS = {
    "herrera_sk": PpoConfig(1e-4, 1e-3, 0.95, 5, 0.99, 0.03, 0.5, 10000, 0.05, 0.05, 800, 64),
    "hohmann": PpoConfig(1e-4, 1e-3, 0.95, 5, 0.99, 0.1, 0.5, 40000, 0.05, 0.05, 4096, 64),
    "chase": PpoConfig(1e-5, 1e-4, 0.95, 5, 0.99, 0.1, 0.4, 10000, 0.05, 0.05, 4096, 64),
    "cam": PpoConfig(1e-4, 1e-3, 0.95, 5, 0.95, 0.5, 0.2, 5000, 0.05, 0.05, 256, 64),
    "geo_constellation": PpoConfig(1e-5, 1e-4, 0.95, 3, 0.99, 0.2, 0.5, 10000, 0.05, 0.05, 1024, 64),
}


def gaussian_log_prob(mean, action, sigma: float) -> np.ndarray:
    """Log density of a diagonal Gaussian with a shared standard deviation, summed over dims."""
    mean = np.atleast_2d(mean)
    action = np.atleast_2d(action)
    k = mean.shape[1]
    z = (action - mean) / sigma
    return -0.5 * np.sum(z * z, axis=1) - k * math.log(sigma) - 0.5 * k * math.log(2 * math.pi)


def clipped_surrogate(ratio, advantages, eps: float) -> np.ndarray:
    """Per-sample min(r·A, clip(r, 1−ε, 1+ε)·A)."""
    ratio = np.asarray(ratio, dtype=float)
    adv = np.asarray(advantages, dtype=float)
    return np.minimum(ratio * adv, np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv)


def ppo_actor_loss(actor: Mlp, states, actions, logp_old, advantages, sigma: float, eps: float):
    """Negative mean clipped surrogate, its parameter gradients and diagnostics."""
    mu, cache = actor.forward(np.atleast_2d(states), cache=True)
    logp = gaussian_log_prob(mu, actions, sigma)
    ratio = np.exp(logp - logp_old)
    adv = np.asarray(advantages, dtype=float)
    surr = clipped_surrogate(ratio, adv, eps)
    n = len(adv)
    loss = -float(np.mean(surr))
    # the unclipped branch is active where it attains the minimum
    active = (ratio * adv <= np.clip(ratio, 1.0 - eps, 1.0 + eps) * adv).astype(float)
    dloss_dratio = -active * adv / n
    dlogp_dmu = (np.atleast_2d(actions) - mu) / sigma**2
    grads, _ = actor.backward(cache, (dloss_dratio * ratio)[:, None] * dlogp_dmu)
    diag = {"actor_loss": loss, "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > eps)),
            "approx_kl": float(np.mean(logp_old - logp))}
    return loss, grads, diag


def critic_loss(critic: Mlp, states, returns):
    """Mean squared error to the returns and its parameter gradients."""
    v, cache = critic.forward(np.atleast_2d(states), cache=True)
    err = v[:, 0] - np.asarray(returns, dtype=float)
    grads, _ = critic.backward(cache, (2.0 * err / len(err))[:, None])
    return float(np.mean(err * err)), grads


def _finite(loss, grads) -> bool:
    return math.isfinite(loss) and all(np.all(np.isfinite(g)) for g in grads)


class PpoAgent:
    """Actor (Tanh output in [-1, 1]) and state-value critic.

    Environment actions are the clipped Gaussian samples mapped affinely onto
    the action bounds.
    """

    kind = "ppo"

    def __init__(self, obs_dim: int, low, high, config: PpoConfig = PpoConfig(),
                 rng: Optional[np.random.Generator] = None):
        self.config = config
        self.low = np.asarray(low, dtype=float)
        self.high = np.asarray(high, dtype=float)
        self.obs_dim = int(obs_dim)
        self.act_dim = len(self.low)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.actor = Mlp([obs_dim, *config.hidden, self.act_dim], "tanh", rng)
        self.critic = Mlp([obs_dim, *config.hidden, 1], "linear", rng)
        self.actor_opt = Adam(self.actor.params, config.actor_lr, max_grad_norm=config.max_grad_norm)
        self.critic_opt = Adam(self.critic.params, config.critic_lr, max_grad_norm=config.max_grad_norm)
        self.sigma_schedule = StepDecay(config.sigma_initial, config.sigma_decay_amount,
                                        config.sigma_decay_every, config.sigma_min)
        self.steps = 0
        self.updates = 0

    @property
    def sigma(self) -> float:
        return self.sigma_schedule(self.steps)

    def to_env(self, raw) -> np.ndarray:
        u = np.clip(np.asarray(raw, dtype=float), -1.0, 1.0)
        return self.low + 0.5 * (u + 1.0) * (self.high - self.low)

    def observe(self, obs) -> None:
        self.actor.normalizer.update(obs)
        self.critic.normalizer.update(obs)

    def act(self, obs, rng: np.random.Generator, deterministic: bool = False):
        """(environment action, raw sample, log-probability)."""
        mu = self.actor(np.asarray(obs, dtype=float))
        sigma = self.sigma
        if deterministic:
            raw = mu.copy()
        else:
            raw = mu + sigma * rng.standard_normal(self.act_dim)
            self.steps += 1
        logp = float(gaussian_log_prob(mu, raw, sigma)[0])
        return self.to_env(raw), raw, logp

    def value(self, obs) -> np.ndarray:
        return self.critic(np.atleast_2d(obs))[:, 0]

    def update(self, batch: TrajectoryBatch, rng: np.random.Generator) -> dict:
        """Clipped-surrogate epochs over minibatches; advantages refreshed every epoch."""
        cfg = self.config
        sigma = self.sigma
        snapshot = ([p.copy() for p in self.actor.params], [p.copy() for p in self.critic.params])
        # the behavior policy is the actor at update start under the frozen normalizer
        logp_old = gaussian_log_prob(self.actor(batch.states), batch.actions, sigma)
        n = len(batch)
        diags = []
        for _ in range(cfg.epochs):
            batch.compute_advantages(self.value)
            order = rng.permutation(n)
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                adv = batch.advantages[idx]
                if cfg.normalize_advantages and len(idx) > 1:
                    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
                a_loss, a_grads, diag = ppo_actor_loss(self.actor, batch.states[idx], batch.actions[idx],
                                                       logp_old[idx], adv, sigma, cfg.clip)
                c_loss, c_grads = critic_loss(self.critic, batch.states[idx], batch.returns[idx])
                diag["critic_loss"] = c_loss
                if not (_finite(a_loss, a_grads) and _finite(c_loss, c_grads)):
                    self.actor.set_params(snapshot[0])
                    self.critic.set_params(snapshot[1])
                    raise NumericalError(f"non-finite PPO loss: {diag}")
                self.actor_opt.step(self.actor.params, a_grads)
                self.critic_opt.step(self.critic.params, c_grads)
                diags.append(diag)
        self.updates += 1
        out = {k: float(np.mean([d[k] for d in diags])) for k in diags[0]}
        out["sigma"] = sigma
        return out

    def state(self) -> dict:
        return {"networks": {"actor": self.actor, "critic": self.critic},
                "optimizers": {"actor": self.actor_opt.state(), "critic": self.critic_opt.state()},
                "counters": {"steps": self.steps, "updates": self.updates},
                "config": self.config.to_dict(), "low": self.low, "high": self.high}

    def load(self, st: dict) -> None:
        self.actor.assign(st["networks"]["actor"])
        self.critic.assign(st["networks"]["critic"])
        self.actor_opt.load(st["optimizers"]["actor"])
        self.critic_opt.load(st["optimizers"]["critic"])
        self.steps = int(st["counters"]["steps"])
        self.updates = int(st["counters"]["updates"])
