"""Mission definitions: rewards, observations, action decoding and termination.

The reward functions at the top are pure; the mission classes wire them to an
:class:`~orbitarena.arena.Arena`.
"""
from __future__ import annotations

import math
from typing import TYPE_CHECKING, Any, Mapping, Optional

import numpy as np

from .constants import R_EARTH, TWO_PI
from .errors import ScenarioError
from .frames import (EquinoctialElements, cartesian_to_equinoctial,
                     equinoctial_to_cartesian, wrap_angle)
from .predictor import StmCache, predict_encounter

if TYPE_CHECKING:
    from .arena import Arena
    from .scenario import ScenarioConfig

RISK_THRESHOLD = 1e-6


# --- pure reward terms -------------------------------------------------------

def _elements5(el) -> np.ndarray:
    if isinstance(el, EquinoctialElements):
        return np.array([el.a, el.ex, el.ey, el.hx, el.hy])
    return np.asarray(el, dtype=float)[:5]


def kolosa_reward(current, target, alphas=(1.0, 1.0, 1.0, 10.0, 10.0)) -> float:
    """Negative weighted element error; the a-term is relative to the target a."""
    c, t = _elements5(current), _elements5(target)
    d = np.abs(t - c)
    d[0] /= t[0]
    return -float(np.dot(np.asarray(alphas, dtype=float), d))


def herrera_reward(r_target_err: float, fuel: float, t: int, max_steps: int = 800,
                   tolerance: float = 1.0) -> float:
    if r_target_err > tolerance or fuel <= 0:
        return 0.0
    return t / max_steps + 0.5


def hohmann_progress(prev_delta, cur_delta, cur_elements, w) -> float:
    """Weighted error reduction, each element scaled by its current magnitude."""
    prev_delta = np.asarray(prev_delta, dtype=float)
    cur_delta = np.asarray(cur_delta, dtype=float)
    scale = np.maximum(np.abs(_elements5(cur_elements)), 1e-12)
    w = np.asarray(w, dtype=float)[:5]
    return float(np.dot(w, (prev_delta - cur_delta) / scale))


def hohmann_reward(progress: float, action, limits, alpha1: float = 1.0, alpha2: float = 0.0) -> float:
    """Reward only active when the thrust decision exceeds 0.5."""
    T, theta, _, delta = (float(x) for x in action)
    if delta <= 0.5:
        return 0.0
    t_max, theta_max = float(limits[0]), float(limits[1])
    return alpha1 * (T / t_max) * progress - alpha2 * theta / theta_max


def wrapped_anomaly_difference(m_leader, m_follower):
    return np.arctan2(np.sin(m_leader - m_follower), np.cos(m_leader - m_follower))


def chase_reward(follower, leader, alphas=(1.0, 1e-3, 1e-3, 1e-2, 1e-2, 1e-6)) -> float:
    """Negative weighted difference of six equinoctial elements (a relative, M wrapped)."""
    f = np.asarray(follower.as_array() if hasattr(follower, "as_array") else follower, dtype=float)
    l = np.asarray(leader.as_array() if hasattr(leader, "as_array") else leader, dtype=float)
    d = np.abs(l[:5] - f[:5])
    d[0] /= l[0]
    dm = abs(float(wrapped_anomaly_difference(l[5], f[5])))
    return -float(np.dot(np.asarray(alphas[:5], dtype=float), d) + alphas[5] * dm)


def orbit_deviation(current, nominal, w) -> float:
    """Weighted absolute element deviation, with a relative to the nominal a."""
    c, n = _elements5(current), _elements5(nominal)
    d = np.abs(c - n)
    d[0] /= n[0]
    return float(np.dot(np.asarray(w, dtype=float), d))


def cam_reward(poc_prev: float, poc_after: float, delta_s: float, decision: float,
               alpha1: float = 1.0, alpha2: float = 0.1, threshold: float = RISK_THRESHOLD) -> float:
    if poc_prev < threshold:
        return -alpha1 * float(decision > 0.5)
    return -(delta_s + alpha2 * float(poc_after > threshold))


def geo_anomaly_penalty(anomalies) -> float:
    """Mean shortfall of pairwise anomaly gaps below the even spacing 2π/n."""
    m = wrap_angle(np.asarray(anomalies, dtype=float))
    n = len(m)
    if n < 2:
        raise ValueError("need at least two anomalies")
    ideal = TWO_PI / n
    i, j = np.triu_indices(n, 1)
    diff = np.abs(m[i] - m[j])
    gap = np.minimum(diff, TWO_PI - diff)
    return float(np.mean(np.maximum(0.0, (ideal - gap) / ideal)))


def geo_reward(altitude_err: float, thrust: float, p_m: float, alpha1: float = 1e-8,
               alpha2: float = 10.0, alpha3: float = 1e-2) -> float:
    return -(alpha1 * abs(altitude_err) + alpha2 * thrust + alpha3 * p_m)


# --- mission classes ---------------------------------------------------------

class Mission:
    """Base mission: free flight, zero reward, generic polar-thrust actions."""

    id = "none"
    obs_dim = 7
    defaults: Mapping[str, Any] = {}

    def __init__(self, config: "ScenarioConfig"):
        unknown = sorted(set(config.mission_params) - set(self.defaults))
        if unknown:
            raise ScenarioError([f"mission/params/{k}: unknown parameter for mission {self.id!r}"
                                 for k in unknown])
        self.params = {**self.defaults, **config.mission_params}
        self.config = config
        self.agents = [b.name for b in config.bodies if b.thrust is not None]

    # episode hooks
    def initial_means(self, arena: "Arena", rng: np.random.Generator) -> dict:
        return {}

    def on_reset(self, arena: "Arena", rng: np.random.Generator) -> None:
        pass

    def episode_limit(self, arena: "Arena") -> int:
        return self.config.stepping.episode_steps

    # actions
    def action_bounds(self, agent: str) -> tuple[np.ndarray, np.ndarray]:
        t = self.config.body(agent).thrust
        high = [t.t_max, t.theta_max, t.phi_max] + ([1.0] if t.decision_flag else [])
        return np.zeros(len(high)), np.array(high, dtype=float)

    def decode(self, arena: "Arena", agent: str, action: np.ndarray) -> tuple[float, float, float]:
        """Polar thrust (T, theta, phi) applied during this step's burn window."""
        t = self.config.body(agent).thrust
        if t.decision_flag and action[3] <= 0.5:
            return 0.0, 0.0, 0.0
        return float(action[0]), float(action[1]), float(action[2])

    # outcome
    def before_step(self, arena: "Arena") -> dict:
        return {}

    def after_step(self, arena: "Arena", actions: dict, ctx: dict):
        """Returns per-agent (reward, terminated, info)."""
        return {a: (0.0, False, {}) for a in arena.agents}

    def observe(self, arena: "Arena", agent: str) -> np.ndarray:
        c = arena.cartesian(agent)
        return np.concatenate([c.position, c.velocity, [arena.fuel(agent)]])

    # helpers
    def elements(self, arena: "Arena", name: str) -> Optional[EquinoctialElements]:
        try:
            return cartesian_to_equinoctial(arena.cartesian(name), arena.forces.mu)
        except ValueError:
            return None

    def _escape(self, arena: "Arena", agent: str):
        return -float(self.params.get("escape_penalty", 100.0)), True, {"escaped": True}


class KolosaTransfer(Mission):
    id = "kolosa_transfer"
    obs_dim = 7
    defaults = {
        "alphas": [1.0, 1.0, 1.0, 10.0, 10.0],
        "target": {"a_m": 6300e3 + R_EARTH, "ex": 0.154, "ey": 0.171, "hx": 0.042, "hy": 0.019},
        "escape_penalty": 100.0,
    }

    def _target(self):
        t = self.params["target"]
        return np.array([t["a_m"], t["ex"], t["ey"], t["hx"], t["hy"]])

    def observe(self, arena, agent):
        el = self.elements(arena, agent)
        vec = el.as_array() if el is not None else np.full(6, np.nan)
        return np.concatenate([vec, [arena.fuel(agent)]])

    def after_step(self, arena, actions, ctx):
        out = {}
        for a in arena.agents:
            el = self.elements(arena, a)
            if el is None or arena.deorbited(a):
                out[a] = self._escape(arena, a)
                continue
            out[a] = (kolosa_reward(el, self._target(), self.params["alphas"]), False, {})
        return out


class HerreraStationKeeping(Mission):
    id = "herrera_sk"
    obs_dim = 8
    defaults = {
        "r_nominal_m": R_EARTH + 550e3,
        "tolerance_m": 1.0,
        "max_steps": 800,
        "dT_fraction": 1.0 / 50.0,
        "dtheta_fraction": 1.0 / 6.0,
    }

    def __init__(self, config):
        super().__init__(config)
        self._thrust = {}

    def v_nominal(self, mu: float) -> float:
        return math.sqrt(mu / self.params["r_nominal_m"])

    def action_bounds(self, agent):
        t = self.config.body(agent).thrust
        hi = np.array([t.t_max * self.params["dT_fraction"], t.theta_max * self.params["dtheta_fraction"]])
        return -hi, hi

    def on_reset(self, arena, rng):
        self._thrust = {a: [0.0, 0.0] for a in self.agents}

    def decode(self, arena, agent, action):
        t = self.config.body(agent).thrust
        T, theta = self._thrust[agent]
        T = min(max(T + float(action[0]), 0.0), t.t_max)
        theta = float(wrap_angle(theta + float(action[1])))
        self._thrust[agent] = [T, theta]
        return T, theta, 0.0

    def _errors(self, arena, agent):
        c = arena.cartesian(agent)
        r_err = float(abs(np.linalg.norm(c.position) - self.params["r_nominal_m"]))
        v_err = float(abs(np.linalg.norm(c.velocity) - self.v_nominal(arena.forces.mu)))
        return r_err, v_err

    def observe(self, arena, agent):
        c = arena.cartesian(agent)
        r_err, v_err = self._errors(arena, agent)
        T, theta = self._thrust.get(agent, (0.0, 0.0))
        return np.concatenate([c.position[:2] / self.params["r_nominal_m"],
                               c.velocity[:2] / self.v_nominal(arena.forces.mu),
                               [r_err, v_err, theta, T]])

    def after_step(self, arena, actions, ctx):
        out = {}
        for a in arena.agents:
            r_err, _ = self._errors(arena, a)
            fuel = arena.fuel(a)
            rew = herrera_reward(r_err, fuel, arena.step_count, self.params["max_steps"],
                                 self.params["tolerance_m"])
            done = r_err > self.params["tolerance_m"] or arena.deorbited(a)
            out[a] = (rew, done, {"r_target_m": r_err})
        return out


class HohmannTransfer(Mission):
    id = "hohmann"
    obs_dim = 7
    defaults = {
        "w": [1e3, 1.0, 1.0, 10.0, 10.0, 1e-3],
        "alpha1": 1.0,
        "alpha2": 0.0,
        "target": {"a_m": 2030e3 + R_EARTH, "ex": 0.007, "ey": 0.006, "hx": 0.041, "hy": 0.015},
        "tolerances": [100.0, 0.005, 0.005, 0.001, 0.001],
        "escape_penalty": 100.0,
    }

    def _target(self):
        t = self.params["target"]
        return np.array([t["a_m"], t["ex"], t["ey"], t["hx"], t["hy"]])

    def observe(self, arena, agent):
        el = self.elements(arena, agent)
        vec = el.as_array() if el is not None else np.full(6, np.nan)
        return np.concatenate([vec, [arena.fuel(agent)]])

    def before_step(self, arena):
        ctx = {}
        for a in arena.agents:
            el = self.elements(arena, a)
            ctx[a] = None if el is None else np.abs(_elements5(el) - self._target())
        return ctx

    def after_step(self, arena, actions, ctx):
        out = {}
        for a in arena.agents:
            el = self.elements(arena, a)
            if el is None or ctx[a] is None or arena.deorbited(a):
                out[a] = self._escape(arena, a)
                continue
            cur = np.abs(_elements5(el) - self._target())
            prog = hohmann_progress(ctx[a], cur, el, self.params["w"])
            lo, hi = self.action_bounds(a)
            rew = hohmann_reward(prog, arena.last_actions[a], hi, self.params["alpha1"], self.params["alpha2"])
            success = bool(np.all(cur <= np.asarray(self.params["tolerances"])))
            out[a] = (rew, False, {"progress": prog, "success": success, "a_error_m": float(cur[0])})
        return out


class Chase(Mission):
    id = "chase"
    obs_dim = 8
    defaults = {
        "alphas": [1.0, 1e-3, 1e-3, 1e-2, 1e-2, 1e-6],
        "leader": "leader",
        "escape_penalty": 100.0,
    }

    def observe(self, arena, agent):
        el = self.elements(arena, agent)
        lead = self.elements(arena, self.params["leader"])
        vec = el.as_array() if el is not None else np.full(6, np.nan)
        return np.concatenate([vec, [lead.M, arena.fuel(agent)]])

    def after_step(self, arena, actions, ctx):
        out = {}
        lead = self.elements(arena, self.params["leader"])
        for a in arena.agents:
            el = self.elements(arena, a)
            if el is None or arena.deorbited(a):
                out[a] = self._escape(arena, a)
                continue
            out[a] = (chase_reward(el, lead, self.params["alphas"]), False, {})
        return out


class CollisionAvoidance(Mission):
    id = "cam"
    obs_dim = 14
    defaults = {
        "w": [10.0, 1e-2, 1e-2, 1e-1, 1e-1],
        "alpha1": 1.0,
        "alpha2": 0.1,
        "threshold": RISK_THRESHOLD,
        "drifter": "drifter",
        "backward_s": 2 * 86400.0,
        "steps_after_tca": 10,
        "grid_step_s": 60.0,
        "covariance_substep_s": 10.0,
        "escape_penalty": 100.0,
    }

    # discrete action table: max thrust along each RSW axis plus no-op
    DISCRETE_ACTIONS = np.array([
        [1.0, 0.0, 0.0, 1.0],
        [1.0, np.pi / 2, 0.0, 1.0],
        [1.0, np.pi, 0.0, 1.0],
        [1.0, np.pi / 2, np.pi, 1.0],
        [1.0, np.pi / 2, np.pi / 2, 1.0],
        [1.0, np.pi / 2, 3 * np.pi / 2, 1.0],
        [0.0, 0.0, 0.0, 0.0],
    ])

    def __init__(self, config):
        super().__init__(config)
        self.end_step = config.stepping.episode_steps
        self.nominal = None
        self.poc = 0.0
        self.encounter = None
        self._caches = None

    def discrete_action(self, agent: str, index: int) -> np.ndarray:
        a = self.DISCRETE_ACTIONS[int(index)].copy()
        a[0] *= self.config.body(agent).thrust.t_max
        return a

    def on_reset(self, arena, rng):
        agent = self.agents[0]
        self.nominal = cartesian_to_equinoctial(self.config.body(agent).mean_state, arena.forces.mu)
        # sampled states are the encounter; rewind both bodies to the episode start
        arena.propagate_all(-float(self.params["backward_s"]))
        arena.reset_clock()
        self._caches = tuple(StmCache(arena.predictor_forces.mu, self.params["covariance_substep_s"])
                             for _ in range(2))
        self.end_step = None
        self.encounter = self.predict(arena, horizon=float(self.params["backward_s"])
                                      + self.params["steps_after_tca"] * self.config.stepping.step_s)
        tca_steps = int(round(self.encounter.tca / self.config.stepping.step_s))
        self.end_step = tca_steps + int(self.params["steps_after_tca"])
        self.poc = self.encounter.poc

    def episode_limit(self, arena):
        return self.end_step if self.end_step is not None else self.config.stepping.episode_steps

    def predict(self, arena, horizon: Optional[float] = None, cached: bool = True):
        agent, drifter = self.agents[0], self.params["drifter"]
        if horizon is None:
            horizon = (self.episode_limit(arena) - arena.step_count) * self.config.stepping.step_s
        ba, bd = self.config.body(agent), self.config.body(drifter)
        return predict_encounter(arena.cartesian(agent), arena.cartesian(drifter), ba.sigma, bd.sigma,
                                 ba.properties.radius, bd.properties.radius, horizon,
                                 arena.predictor_forces.mu, self.params["grid_step_s"],
                                 self.params["covariance_substep_s"],
                                 caches=self._caches if cached else None)

    def observe(self, arena, agent):
        el = self.elements(arena, agent)
        dr = self.elements(arena, self.params["drifter"])
        a = el.as_array() if el is not None else np.full(6, np.nan)
        d = dr.as_array() if dr is not None else np.full(6, np.nan)
        return np.concatenate([a[:5], [a[5]], d[:5], [d[5]], [arena.fuel(agent), self.poc]])

    def before_step(self, arena):
        return {"poc_prev": self.poc}

    def after_step(self, arena, actions, ctx):
        out = {}
        agent = self.agents[0]
        if agent not in arena.agents:
            return out
        el = self.elements(arena, agent)
        if el is None or arena.deorbited(agent):
            out[agent] = self._escape(arena, agent)
            return out
        self.encounter = self.predict(arena)
        self.poc = self.encounter.poc
        act = arena.last_actions[agent]
        ds = orbit_deviation(el, self.nominal, self.params["w"])
        rew = cam_reward(ctx["poc_prev"], self.poc, ds, act[3], self.params["alpha1"],
                         self.params["alpha2"], self.params["threshold"])
        info = {"poc": self.poc, "tca_s": self.encounter.tca, "miss_m": self.encounter.miss_distance,
                "orbit_deviation": ds}
        out[agent] = (rew, False, info)
        return out


class GeoConstellation(Mission):
    id = "geo_constellation"
    obs_dim = 8
    defaults = {
        "alphas": [1e-8, 10.0, 1e-2],
        "a_geo_m": 42164e3,
        "random_anomalies": True,
        "escape_penalty": 100.0,
    }

    def __init__(self, config):
        super().__init__(config)
        self.obs_dim = 4 + len(self.agents)
        self._applied = {}

    def action_bounds(self, agent):
        t = self.config.body(agent).thrust
        return np.zeros(2), np.array([t.t_max, t.theta_max])

    def decode(self, arena, agent, action):
        T = float(action[0]) if arena.fuel(agent) > 0 else 0.0
        self._applied[agent] = T
        return float(action[0]), float(action[1]), 0.0

    def initial_means(self, arena, rng):
        if not self.params["random_anomalies"]:
            return {}
        out = {}
        for a in self.agents:
            mean = self.config.body(a).mean_state
            el = cartesian_to_equinoctial(mean, arena.forces.mu)
            el = EquinoctialElements(el.a, el.ex, el.ey, el.hx, el.hy, float(rng.uniform(0.0, TWO_PI)))
            out[a] = equinoctial_to_cartesian(el, arena.forces.mu)
        return out

    def _anomalies(self, arena):
        return np.array([self.elements(arena, a).M for a in self.agents])

    def observe(self, arena, agent):
        el = self.elements(arena, agent)
        return np.concatenate([[el.a, el.ex, el.ey, arena.fuel(agent)], self._anomalies(arena)])

    def after_step(self, arena, actions, ctx):
        p_m = geo_anomaly_penalty(self._anomalies(arena))
        a1, a2, a3 = self.params["alphas"]
        out = {}
        for a in arena.agents:
            alt_err = self.params["a_geo_m"] - np.linalg.norm(arena.cartesian(a).position)
            T = self._applied.get(a, 0.0)
            out[a] = (geo_reward(alt_err, T, p_m, a1, a2, a3), bool(arena.deorbited(a)),
                      {"anomaly_penalty": p_m, "thrust_n": T})
        return out


MISSIONS = {m.id: m for m in (Mission, KolosaTransfer, HerreraStationKeeping, HohmannTransfer, Chase,
                               CollisionAvoidance, GeoConstellation)}


def build_mission(config: "ScenarioConfig") -> Mission:
    try:
        cls = MISSIONS[config.mission_id]
    except KeyError:
        raise ScenarioError(f"mission/id: unknown mission id {config.mission_id!r}") from None
    return cls(config)


def build_observation(mission_id: str, arena: "Arena", agent: str) -> np.ndarray:
    """Observation vector of ``agent`` under the arena's current snapshot."""
    if mission_id not in MISSIONS:
        raise ValueError(f"unknown mission id {mission_id!r}")
    if arena.mission.id != mission_id:
        raise ValueError(f"arena runs mission {arena.mission.id!r}, not {mission_id!r}")
    if agent not in arena.possible_agents:
        raise KeyError(agent)
    return arena.mission.observe(arena, agent)
