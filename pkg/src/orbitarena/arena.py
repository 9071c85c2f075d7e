"""Multi-agent orbital environment with simultaneous actions."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .constants import G0
from .dynamics import BodyBatch, ForceConfig, PropState, rk4_batch, rk4_scalar
from .frames import CartesianState
from .missions import Mission, build_mission
from .predictor import predict_encounter
from .scenario import ScenarioConfig, load_document, parse_document
from .uncertainty import StateDistribution, body_seed, sample_state


@dataclass
class StepOutcome:
    observations: dict = field(default_factory=dict)
    rewards: dict = field(default_factory=dict)
    terminated: dict = field(default_factory=dict)
    truncated: dict = field(default_factory=dict)
    infos: dict = field(default_factory=dict)

    def __iter__(self):
        return iter((self.observations, self.rewards, self.terminated, self.truncated, self.infos))


def polar_thrust_batch(r, v, T, theta, phi) -> np.ndarray:
    """Inertial thrust vectors from polar components in each body's RSW frame."""
    rn = np.linalg.norm(r, axis=1, keepdims=True)
    R = r / rn
    h = np.cross(r, v)
    hn = np.linalg.norm(h, axis=1, keepdims=True)
    W = np.divide(h, hn, out=np.zeros_like(h), where=hn > 0)
    S = np.cross(W, R)
    st = np.sin(theta)[:, None]
    return T[:, None] * (np.cos(theta)[:, None] * S + st * (np.cos(phi)[:, None] * R + np.sin(phi)[:, None] * W))


def _segments(step: float, burn: Optional[float], substep: float):
    """(duration, thrust_on) pieces of one step, each cut into equal substeps."""
    pieces = [(burn, True), (step - burn, False)] if burn is not None and burn < step else [(step, True)]
    out = []
    for dur, on in pieces:
        n = max(1, int(math.ceil(abs(dur) / substep - 1e-12)))
        out.extend([(dur / n, on)] * n)
    return out


def advance_bodies(r, v, m, polar, segments, bodies: BodyBatch, forces: ForceConfig):
    """Integrate a group of bodies through ``segments``; returns (r, v, m, exhausted)."""
    T, theta, phi = polar
    exhausted = np.zeros(len(m), dtype=bool)
    for dt, on in segments:
        thrust = None
        if on and T.any():
            Teff = np.where(m - bodies.dry_mass > 0, T, 0.0)
            if Teff.any():
                thrust = polar_thrust_batch(r, v, Teff, theta, phi)
        r, v, m, ex = rk4_batch(r, v, m, dt, thrust, bodies, forces)
        exhausted |= ex
    return r, v, m, exhausted


def _polar_thrust_scalar(r, v, T, theta, phi):
    x, y, z = r
    rn = math.sqrt(x * x + y * y + z * z)
    R = (x / rn, y / rn, z / rn)
    hx, hy, hz = y * v[2] - z * v[1], z * v[0] - x * v[2], x * v[1] - y * v[0]
    hn = math.sqrt(hx * hx + hy * hy + hz * hz)
    W = (hx / hn, hy / hn, hz / hn) if hn > 0 else (0.0, 0.0, 0.0)
    S = (W[1] * R[2] - W[2] * R[1], W[2] * R[0] - W[0] * R[2], W[0] * R[1] - W[1] * R[0])
    ct, st, cp, sp = math.cos(theta), math.sin(theta), math.cos(phi), math.sin(phi)
    return tuple(T * (ct * S[k] + st * (cp * R[k] + sp * W[k])) for k in range(3))


def advance_small(r, v, m, polar, segments, bodies: BodyBatch, forces: ForceConfig):
    """Same contract as :func:`advance_bodies`, body by body with plain floats."""
    T, theta, phi = polar
    n = len(m)
    r_out, v_out, m_out = np.empty((n, 3)), np.empty((n, 3)), np.empty(n)
    exhausted = np.zeros(n, dtype=bool)
    for i in range(n):
        ri, vi, mi = tuple(r[i].tolist()), tuple(v[i].tolist()), float(m[i])
        dry, cda = float(bodies.dry_mass[i]), float(bodies.cd_area[i])
        Ti = float(T[i])
        mdot = -Ti / (float(bodies.isp[i]) * G0)
        for dt, on in segments:
            fuel = mi - dry
            if on and Ti > 0 and fuel > 0:
                thrust = _polar_thrust_scalar(ri, vi, Ti, float(theta[i]), float(phi[i]))
                if dt > 0 and -mdot * dt > fuel:
                    t_ex = fuel / -mdot
                    ri, vi, _ = rk4_scalar(ri, vi, mi, t_ex, thrust, mdot, cda, forces)
                    ri, vi, _ = rk4_scalar(ri, vi, dry, dt - t_ex, None, 0.0, cda, forces)
                    mi = dry
                    exhausted[i] = True
                else:
                    ri, vi, mi = rk4_scalar(ri, vi, mi, dt, thrust, mdot, cda, forces)
            else:
                ri, vi, mi = rk4_scalar(ri, vi, mi, dt, None, 0.0, cda, forces)
        r_out[i], v_out[i], m_out[i] = ri, vi, mi
    return r_out, v_out, m_out, exhausted


SMALL_BATCH = 4


class Arena:
    """Environment handle built from a scenario document.

    Agents are the bodies that carry a thrust block. ``reset`` samples every
    body from its configured distribution; ``step`` advances all bodies by
    one step with the actions applied simultaneously.
    """

    def __init__(self, config: ScenarioConfig, forces: Optional[ForceConfig] = None,
                 parallel: Optional[bool] = None):
        self.config = config
        self.forces = forces if forces is not None else config.forces
        self.predictor_forces = self.forces.point_mass()
        self.names = [b.name for b in config.bodies]
        self._index = {n: i for i, n in enumerate(self.names)}
        self._batch = BodyBatch.from_props([b.properties for b in config.bodies])
        self.parallel = config.stepping.parallel if parallel is None else parallel
        self.workers = config.stepping.workers
        self.mission: Mission = build_mission(config)
        self.possible_agents = list(self.mission.agents)
        self.agents: list = []
        n = len(self.names)
        self._r = np.zeros((n, 3))
        self._v = np.zeros((n, 3))
        self._m = np.array([b.properties.wet_mass for b in config.bodies])
        self._deorbited = np.zeros(n, dtype=bool)
        self._burned = np.zeros(n)
        self.t = 0.0
        self.step_count = 0
        self.last_actions: dict = {}
        self._done = True
        self._segments = _segments(config.stepping.step_s, config.stepping.burn_window_s,
                                   config.stepping.substep_s)
        self._pool: Optional[ThreadPoolExecutor] = None

    # --- construction -------------------------------------------------------
    @classmethod
    def from_document(cls, source, **kw) -> "Arena":
        return cls(parse_document(load_document(source)), **kw)

    # --- queries --------------------------------------------------------------
    def state(self, name: str) -> PropState:
        i = self._idx(name)
        return PropState(self._r[i].copy(), self._v[i].copy(), self._m[i], self.t)

    def cartesian(self, name: str) -> CartesianState:
        i = self._idx(name)
        return CartesianState(self._r[i].copy(), self._v[i].copy(), self.t)

    def fuel(self, name: str) -> float:
        i = self._idx(name)
        return max(float(self._m[i] - self._batch.dry_mass[i]), 0.0)

    def fuel_burned(self, name: str) -> float:
        return float(self._burned[self._idx(name)])

    def deorbited(self, name: str) -> bool:
        return bool(self._deorbited[self._idx(name)])

    def positions(self) -> np.ndarray:
        return self._r.copy()

    def velocities(self) -> np.ndarray:
        return self._v.copy()

    def masses(self) -> np.ndarray:
        return self._m.copy()

    def action_space(self, agent: str) -> tuple[np.ndarray, np.ndarray]:
        return self.mission.action_bounds(agent)

    def observation_arity(self, agent: str) -> int:
        return int(self.mission.obs_dim)

    def _idx(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown body {name!r}") from None

    def body_distance(self, name_a: str, name_b: str) -> float:
        return float(np.linalg.norm(self._r[self._idx(name_a)] - self._r[self._idx(name_b)]))

    def pair_conjunction(self, name_a: str, name_b: str, horizon: Optional[float] = None):
        """(TCA s, miss distance m, PoC) from the point-mass predictor.

        The look-ahead defaults to the rest of the episode.
        """
        a, b = self.config.body(name_a), self.config.body(name_b)
        if not (np.any(a.sigma) or np.any(b.sigma)):
            raise ValueError("pair_conjunction needs at least one body with uncertainty")
        if horizon is None:
            horizon = max(self.mission.episode_limit(self) - self.step_count, 0) * self.config.stepping.step_s
        enc = predict_encounter(self.cartesian(name_a), self.cartesian(name_b), a.sigma, b.sigma,
                                a.properties.radius, b.properties.radius, horizon, self.predictor_forces.mu)
        return enc.tca, enc.miss_distance, enc.poc

    # --- episode control ------------------------------------------------------
    def reset(self, seed: Optional[int] = None) -> dict:
        seed = self.config.seed if seed is None else int(seed)
        rng = np.random.default_rng(seed)
        means = self.mission.initial_means(self, rng)
        for i, b in enumerate(self.config.bodies):
            mean = means.get(b.name, b.mean_state)
            dist = StateDistribution(np.concatenate([mean.position, mean.velocity]), b.sigma)
            self._r[i], self._v[i] = sample_state(dist, body_seed(seed, b.name))
        self._m = np.array([b.properties.wet_mass for b in self.config.bodies])
        self._deorbited[:] = False
        self._burned[:] = 0.0
        self.reset_clock()
        self.agents = list(self.possible_agents)
        self.last_actions = {}
        self.mission.on_reset(self, rng)
        self._done = False
        return {a: self.mission.observe(self, a) for a in self.agents}

    def reset_clock(self) -> None:
        self.t = 0.0
        self.step_count = 0

    def propagate_all(self, duration: float) -> None:
        """Coast every body for ``duration`` seconds (negative goes backward)."""
        segs = _segments(abs(duration), None, self.config.stepping.substep_s)
        sign = 1.0 if duration >= 0 else -1.0
        segs = [(sign * dt, False) for dt, _ in segs]
        zeros = np.zeros(len(self.names))
        self._advance(segs, (zeros, zeros, zeros))
        self.t += duration

    def _advance(self, segments, polar) -> np.ndarray:
        live = np.flatnonzero(~self._deorbited)
        exhausted = np.zeros(len(self.names), dtype=bool)
        if len(live) == 0:
            return exhausted
        T, th, ph = (np.asarray(p, dtype=float) for p in polar)
        if len(live) <= SMALL_BATCH:
            c = live
            results = [(c, advance_small(self._r[c], self._v[c], self._m[c], (T[c], th[c], ph[c]),
                                         segments, self._batch.subset(c), self.forces))]
        elif self.parallel:
            chunks = [c for c in np.array_split(live, min(self.workers, len(live))) if len(c)]
            if self._pool is None:
                self._pool = ThreadPoolExecutor(max_workers=self.workers)
            futures = [self._pool.submit(advance_bodies, self._r[c], self._v[c], self._m[c],
                                         (T[c], th[c], ph[c]), segments, self._batch.subset(c), self.forces)
                       for c in chunks]
            results = [(c, f.result()) for c, f in zip(chunks, futures)]
        else:
            c = live
            results = [(c, advance_bodies(self._r[c], self._v[c], self._m[c], (T[c], th[c], ph[c]),
                                          segments, self._batch.subset(c), self.forces))]
        # commit in body order
        for c, (r, v, m, ex) in results:
            self._burned[c] += self._m[c] - m
            self._r[c], self._v[c], self._m[c] = r, v, m
            exhausted[c] = ex
        below = np.linalg.norm(self._r, axis=1) < self.forces.earth_radius
        self._deorbited |= below
        return exhausted

    def step(self, actions: Mapping[str, Any]) -> StepOutcome:
        if self._done:
            raise RuntimeError("episode is over; call reset() first")
        missing = [a for a in self.agents if a not in actions]
        extra = [a for a in actions if a not in self.agents]
        if missing or extra:
            raise ValueError(f"actions must cover exactly the live agents; missing={missing} unexpected={extra}")
        n = len(self.names)
        T, th, ph = np.zeros(n), np.zeros(n), np.zeros(n)
        clamped = {}
        self.last_actions = {}
        for agent in self.agents:
            lo, hi = self.mission.action_bounds(agent)
            a = np.asarray(actions[agent], dtype=float).reshape(-1)
            if a.shape != lo.shape:
                raise ValueError(f"action for {agent!r} has arity {a.size}, expected {lo.size}")
            if not np.all(np.isfinite(a)):
                raise ValueError(f"action for {agent!r} is not finite")
            c = np.clip(a, lo, hi)
            clamped[agent] = bool(np.any(c != a))
            self.last_actions[agent] = c
        ctx = self.mission.before_step(self)
        for agent in self.agents:
            i = self._idx(agent)
            T[i], th[i], ph[i] = self.mission.decode(self, agent, self.last_actions[agent])
        exhausted = self._advance(self._segments, (T, th, ph))
        self.t += self.config.stepping.step_s
        self.step_count += 1
        results = self.mission.after_step(self, self.last_actions, ctx)
        limit = self.mission.episode_limit(self)
        out = StepOutcome()
        for agent in list(self.agents):
            rew, term, info = results.get(agent, (0.0, False, {}))
            i = self._idx(agent)
            info = dict(info)
            info.update(fuel=self.fuel(agent), fuel_burned=float(self._burned[i]),
                        clamped=clamped[agent], fuel_exhausted=bool(exhausted[i]),
                        deorbited=bool(self._deorbited[i]))
            trunc = self.step_count >= limit and not term
            out.observations[agent] = self.mission.observe(self, agent)
            out.rewards[agent] = float(rew)
            out.terminated[agent] = bool(term)
            out.truncated[agent] = bool(trunc)
            out.infos[agent] = info
        self.agents = [a for a in self.agents if not (out.terminated[a] or out.truncated[a])]
        if not self.agents and (self.possible_agents or self.step_count >= limit):
            self._done = True
        return out

    @property
    def done(self) -> bool:
        return self._done

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def load_scenario(document, **kw) -> Arena:
    """Build an environment from a path, JSON text or mapping (not yet reset)."""
    return Arena.from_document(document, **kw)
