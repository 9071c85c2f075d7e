"""Exploration noise and step-count schedules."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class OuState:
    """Ornstein-Uhlenbeck process state."""

    x: np.ndarray
    mu: float = 0.0
    sigma: float = 0.2
    theta: float = 0.15
    dt: float = 0.01

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))


def ou_step(st: OuState, rng: np.random.Generator) -> OuState:
    """x ← x + θ(μ − x)Δt + σ√Δt·N(0, 1)."""
    noise = rng.standard_normal(st.x.shape)
    x = st.x + st.theta * (st.mu - st.x) * st.dt + st.sigma * math.sqrt(st.dt) * noise
    return replace(st, x=x)


class OuNoise:
    """Stateful wrapper around :func:`ou_step`."""

    def __init__(self, dim: int, mu: float = 0.0, sigma: float = 0.2, theta: float = 0.15, dt: float = 0.01):
        self.state = OuState(np.full(dim, mu, dtype=float), mu, sigma, theta, dt)

    def reset(self) -> None:
        self.state = replace(self.state, x=np.full(self.state.x.shape, self.state.mu))

    def __call__(self, rng: np.random.Generator) -> np.ndarray:
        self.state = ou_step(self.state, rng)
        return self.state.x.copy()


@dataclass(frozen=True)
class StepDecay:
    """Value lowered by ``amount`` every ``every`` steps, never below ``minimum``."""

    initial: float
    amount: float = 0.05
    every: int = 10000
    minimum: float = 0.05

    def __post_init__(self):
        if self.every <= 0:
            raise ValueError("decay interval must be positive")

    def __call__(self, step: int) -> float:
        return max(self.minimum, self.initial - self.amount * (int(step) // self.every))
