"""Force models and fixed-step RK4 propagation of (r, v, m).

The integrator core works on batches of bodies (arrays with a leading body
axis) so the environment can advance many bodies with one call. The
single-body functions are thin wrappers around the same kernels.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Optional, Sequence

import numpy as np

from .constants import G0, J2_EARTH, MU_EARTH, R_EARTH
from .frames import CartesianState, _rotation_pqw_to_eci, cartesian_to_keplerian, solve_kepler

# default exponential atmosphere (reference density at 700 km)
DRAG_RHO0 = 3.614e-13
DRAG_H0 = 700_000.0
DRAG_SCALE_HEIGHT = 88_667.0


@dataclass(frozen=True)
class BodyProperties:
    dry_mass: float
    fuel_mass: float = 0.0
    radius: float = 1.0
    drag_coefficient: float = 2.2
    reflection_coefficient: float = 1.0  # kept for tuning parity; no SRP force in scope
    cross_section_area: Optional[float] = None
    isp: float = 300.0

    def __post_init__(self):
        if not self.dry_mass > 0:
            raise ValueError("dry_mass must be positive")
        if not self.fuel_mass >= 0:
            raise ValueError("fuel_mass must be non-negative")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.isp > 0:
            raise ValueError("isp must be positive")
        if self.cross_section_area is None:
            object.__setattr__(self, "cross_section_area", math.pi * self.radius**2)

    @property
    def wet_mass(self) -> float:
        return self.dry_mass + self.fuel_mass


@dataclass(frozen=True)
class ForceConfig:
    mu: float = MU_EARTH
    earth_radius: float = R_EARTH
    enable_j2: bool = False
    j2: float = J2_EARTH
    enable_drag: bool = False
    drag_rho0: float = DRAG_RHO0
    drag_h0: float = DRAG_H0
    drag_scale_height: float = DRAG_SCALE_HEIGHT

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.enable_drag and not self.drag_scale_height > 0:
            raise ValueError("drag scale height must be positive")

    @classmethod
    def tier(cls, name: str, **kw) -> "ForceConfig":
        """Named fidelity tiers: newtonian, newtonian+drag, full (J2 + drag)."""
        tiers = {
            "newtonian": dict(enable_j2=False, enable_drag=False),
            "newtonian+drag": dict(enable_j2=False, enable_drag=True),
            "full": dict(enable_j2=True, enable_drag=True),
        }
        if name not in tiers:
            raise ValueError(f"unknown force tier {name!r}; expected one of {sorted(tiers)}")
        return cls(**{**tiers[name], **kw})

    def point_mass(self) -> "ForceConfig":
        return replace(self, enable_j2=False, enable_drag=False)


@dataclass(frozen=True)
class PropState:
    r: np.ndarray
    v: np.ndarray
    m: float
    t: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "t", float(self.t))

    @classmethod
    def from_cartesian(cls, c: CartesianState, m: float) -> "PropState":
        return cls(c.position, c.velocity, m, c.epoch)

    def cartesian(self) -> CartesianState:
        return CartesianState(self.r, self.v, self.t)


# --- force terms -----------------------------------------------------------

def gravity_accel(r, mu: float = MU_EARTH) -> np.ndarray:
    """Point-mass gravity, -mu r / |r|^3. Accepts (3,) or (N, 3)."""
    r = np.asarray(r, dtype=float)
    rn = np.linalg.norm(r, axis=-1, keepdims=True)
    if np.any(rn == 0):
        raise ValueError("gravity undefined at zero radius")
    return -mu * r / rn**3


def j2_accel(r, mu: float = MU_EARTH, j2: float = J2_EARTH, earth_radius: float = R_EARTH) -> np.ndarray:
    """Zonal J2 perturbation (gradient of the second zonal harmonic)."""
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    r2 = x * x + y * y + z * z
    rn = np.sqrt(r2)
    k = -1.5 * j2 * mu * earth_radius**2 / (r2 * r2 * rn)
    zz = 5.0 * z * z / r2
    return np.stack([k * x * (1.0 - zz), k * y * (1.0 - zz), k * z * (3.0 - zz)], axis=-1)


def atmospheric_density(altitude, cfg: ForceConfig):
    return cfg.drag_rho0 * np.exp(-(np.asarray(altitude, dtype=float) - cfg.drag_h0) / cfg.drag_scale_height)


def _drag_batch(r, v, m, cd_area, cfg: ForceConfig):
    rn = np.linalg.norm(r, axis=-1)
    rho = atmospheric_density(rn - cfg.earth_radius, cfg)
    vn = np.linalg.norm(v, axis=-1)
    return (-0.5 * cd_area * rho * vn / m)[..., None] * v


def drag_accel(state: PropState, props: BodyProperties, cfg: ForceConfig) -> np.ndarray:
    """-1/2 C_D (A/m) rho |v| v with an exponential atmosphere."""
    return _drag_batch(state.r[None], state.v[None], np.array([state.m]),
                       np.array([props.drag_coefficient * props.cross_section_area]), cfg)[0]


def mass_flow(thrust_norm, isp: float) -> float:
    """Propellant mass rate, kg/s (non-positive)."""
    if not isp > 0:
        raise ValueError("isp must be positive")
    if np.ndim(thrust_norm):
        return -np.asarray(thrust_norm, dtype=float) / (isp * G0)
    return -float(thrust_norm) / (isp * G0)


# --- batched kernel ----------------------------------------------------------

@dataclass
class BodyBatch:
    """Per-body constants for the batched kernel."""
    cd_area: np.ndarray
    isp: np.ndarray
    dry_mass: np.ndarray

    @classmethod
    def from_props(cls, props: Sequence[BodyProperties]) -> "BodyBatch":
        return cls(
            cd_area=np.array([p.drag_coefficient * p.cross_section_area for p in props], dtype=float),
            isp=np.array([p.isp for p in props], dtype=float),
            dry_mass=np.array([p.dry_mass for p in props], dtype=float),
        )

    def subset(self, idx) -> "BodyBatch":
        return BodyBatch(self.cd_area[idx], self.isp[idx], self.dry_mass[idx])


def _accel_batch(r, v, m, thrust, bodies: BodyBatch, cfg: ForceConfig):
    # inlined force terms: this is the innermost loop of every propagation
    r2 = np.einsum("ij,ij->i", r, r)
    rn = np.sqrt(r2)
    a = (-cfg.mu / (r2 * rn))[:, None] * r
    if cfg.enable_j2:
        a += j2_accel(r, cfg.mu, cfg.j2, cfg.earth_radius)
    if cfg.enable_drag:
        rho = cfg.drag_rho0 * np.exp(-(rn - cfg.earth_radius - cfg.drag_h0) / cfg.drag_scale_height)
        vn = np.sqrt(np.einsum("ij,ij->i", v, v))
        a -= (0.5 * bodies.cd_area * rho * vn / m)[:, None] * v
    if thrust is not None:
        a += thrust / m[:, None]
    return a


def _rk4_batch_raw(r, v, m, dt, thrust, mdot, bodies, cfg):
    # thrust and mdot are constant over the step
    h = 0.5 * dt
    if mdot is None:
        m2 = m4 = m
    else:
        m2, m4 = m + h * mdot, m + dt * mdot
    k1v = _accel_batch(r, v, m, thrust, bodies, cfg)
    k2r = v + h * k1v
    k2v = _accel_batch(r + h * v, k2r, m2, thrust, bodies, cfg)
    k3r = v + h * k2v
    k3v = _accel_batch(r + h * k2r, k3r, m2, thrust, bodies, cfg)
    k4r = v + dt * k3v
    k4v = _accel_batch(r + dt * k3r, k4r, m4, thrust, bodies, cfg)
    r_new = r + (dt / 6.0) * (v + 2.0 * (k2r + k3r) + k4r)
    v_new = v + (dt / 6.0) * (k1v + 2.0 * (k2v + k3v) + k4v)
    return r_new, v_new, m4


def rk4_batch(r, v, m, dt: float, thrust, bodies: BodyBatch, cfg: ForceConfig):
    """One RK4 step for a batch of bodies with piecewise-constant thrust.

    ``thrust`` may be ``None`` for a coasting batch. Returns
    ``(r, v, m, exhausted)``. A body whose fuel would run out inside the step
    is split at the exhaustion time and coasts for the remainder;
    ``exhausted`` flags those bodies.
    """
    exhausted = np.zeros(len(m), dtype=bool)
    if thrust is None:
        r1, v1, m1 = _rk4_batch_raw(r, v, m, dt, None, None, bodies, cfg)
        return r1, v1, m1, exhausted
    thrust = np.asarray(thrust, dtype=float)
    tn = np.sqrt(np.einsum("ij,ij->i", thrust, thrust))
    mdot = -tn / (bodies.isp * G0)
    fuel = m - bodies.dry_mass
    if dt > 0:
        exhausted = (tn > 0) & (-mdot * dt > fuel)
    if not exhausted.any():
        r1, v1, m1 = _rk4_batch_raw(r, v, m, dt, thrust, mdot, bodies, cfg)
        return r1, v1, m1, exhausted
    ok = ~exhausted
    r1 = np.empty_like(r)
    v1 = np.empty_like(v)
    m1 = np.empty_like(m)
    if ok.any():
        r1[ok], v1[ok], m1[ok] = _rk4_batch_raw(r[ok], v[ok], m[ok], dt, thrust[ok], mdot[ok],
                                                bodies.subset(ok), cfg)
    for j in np.flatnonzero(exhausted):
        sub = bodies.subset([j])
        t_ex = fuel[j] / -mdot[j]
        rj, vj, mj = r[j:j + 1], v[j:j + 1], m[j:j + 1]
        if t_ex > 0:
            rj, vj, mj = _rk4_batch_raw(rj, vj, mj, t_ex, thrust[j:j + 1], mdot[j:j + 1], sub, cfg)
        rj, vj, _ = _rk4_batch_raw(rj, vj, mj, dt - t_ex, None, None, sub, cfg)
        r1[j], v1[j], m1[j] = rj[0], vj[0], bodies.dry_mass[j]
    return r1, v1, m1, exhausted


def _accel_scalar(x, y, z, vx, vy, vz, m, tx, ty, tz, cd_area, cfg: ForceConfig):
    r2 = x * x + y * y + z * z
    rn = math.sqrt(r2)
    k = -cfg.mu / (r2 * rn)
    ax, ay, az = k * x, k * y, k * z
    if cfg.enable_j2:
        kj = -1.5 * cfg.j2 * cfg.mu * cfg.earth_radius**2 / (r2 * r2 * rn)
        zz = 5.0 * z * z / r2
        ax += kj * x * (1.0 - zz)
        ay += kj * y * (1.0 - zz)
        az += kj * z * (3.0 - zz)
    if cfg.enable_drag:
        rho = cfg.drag_rho0 * math.exp(-(rn - cfg.earth_radius - cfg.drag_h0) / cfg.drag_scale_height)
        kd = -0.5 * cd_area * rho * math.sqrt(vx * vx + vy * vy + vz * vz) / m
        ax += kd * vx
        ay += kd * vy
        az += kd * vz
    return ax + tx / m, ay + ty / m, az + tz / m


def rk4_scalar(r, v, m: float, dt: float, thrust, mdot: float, cd_area: float, cfg: ForceConfig):
    """Plain-float RK4 step for one body (same scheme as the batched kernel).

    Used for very small batches where array overhead dominates.
    """
    x, y, z = r
    vx, vy, vz = v
    tx, ty, tz = thrust if thrust is not None else (0.0, 0.0, 0.0)
    h = 0.5 * dt
    m2, m4 = m + h * mdot, m + dt * mdot
    a1 = _accel_scalar(x, y, z, vx, vy, vz, m, tx, ty, tz, cd_area, cfg)
    v2 = (vx + h * a1[0], vy + h * a1[1], vz + h * a1[2])
    a2 = _accel_scalar(x + h * vx, y + h * vy, z + h * vz, *v2, m2, tx, ty, tz, cd_area, cfg)
    v3 = (vx + h * a2[0], vy + h * a2[1], vz + h * a2[2])
    a3 = _accel_scalar(x + h * v2[0], y + h * v2[1], z + h * v2[2], *v3, m2, tx, ty, tz, cd_area, cfg)
    v4 = (vx + dt * a3[0], vy + dt * a3[1], vz + dt * a3[2])
    a4 = _accel_scalar(x + dt * v3[0], y + dt * v3[1], z + dt * v3[2], *v4, m4, tx, ty, tz, cd_area, cfg)
    c = dt / 6.0
    r_new = (x + c * (vx + 2.0 * (v2[0] + v3[0]) + v4[0]),
             y + c * (vy + 2.0 * (v2[1] + v3[1]) + v4[1]),
             z + c * (vz + 2.0 * (v2[2] + v3[2]) + v4[2]))
    v_new = (vx + c * (a1[0] + 2.0 * (a2[0] + a3[0]) + a4[0]),
             vy + c * (a1[1] + 2.0 * (a2[1] + a3[1]) + a4[1]),
             vz + c * (a1[2] + 2.0 * (a2[2] + a3[2]) + a4[2]))
    return r_new, v_new, m4


# --- single-body API --------------------------------------------------------

def derivative(t: float, s: PropState, thrust, props: BodyProperties, cfg: ForceConfig):
    """Time derivative of (r, v, m) as a tuple ``(r_dot, v_dot, m_dot)``."""
    if not s.m > 0:
        raise ValueError("mass must be positive")
    thrust = np.asarray(thrust, dtype=float).reshape(1, 3)
    bodies = BodyBatch.from_props([props])
    a = _accel_batch(s.r[None], s.v[None], np.array([s.m]), thrust, bodies, cfg)[0]
    return s.v.copy(), a, mass_flow(float(np.linalg.norm(thrust)), props.isp)


@dataclass(frozen=True)
class StepResult:
    state: PropState
    fuel_exhausted: bool = False


def rk4_step(s: PropState, dt: float, thrust, props: BodyProperties, cfg: ForceConfig) -> PropState:
    """Advance one RK4 step; negative ``dt`` propagates backward in time."""
    return rk4_step_info(s, dt, thrust, props, cfg).state


def rk4_step_info(s: PropState, dt: float, thrust, props: BodyProperties, cfg: ForceConfig) -> StepResult:
    if dt == 0:
        raise ValueError("step size must be non-zero")
    thrust = np.asarray(thrust, dtype=float).reshape(1, 3)
    bodies = BodyBatch.from_props([props])
    r, v, m, ex = rk4_batch(s.r[None], s.v[None], np.array([s.m]), dt, thrust, bodies, cfg)
    return StepResult(PropState(r[0], v[0], m[0], s.t + dt), bool(ex[0]))


ThrustSchedule = Callable[[int, PropState], np.ndarray]


@dataclass
class Trajectory:
    """States produced by :func:`propagate`, including the initial one."""
    states: list = field(default_factory=list)
    deorbited: bool = False
    fuel_exhausted: bool = False

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self) -> Iterator[PropState]:
        return iter(self.states)

    def positions(self) -> np.ndarray:
        return np.array([s.r for s in self.states])


def propagate(s: PropState, duration: float, step: float, props: BodyProperties, cfg: ForceConfig,
              thrust_schedule: Optional[ThrustSchedule | np.ndarray] = None,
              burn_window: Optional[float] = None) -> Trajectory:
    """Fixed-step propagation with an optional per-step thrust schedule.

    ``thrust_schedule`` is either a constant inertial thrust vector or a
    callable ``(step_index, state) -> vector`` evaluated at the start of each
    step. With ``burn_window`` set, thrust is only active during the first
    ``burn_window`` seconds of each step. A final partial step covers any
    remainder of ``duration``; propagation halts if the body drops below
    the Earth's surface.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    if duration < 0:
        raise ValueError("duration must be non-negative (use a negative rk4_step to go backward)")
    traj = Trajectory([s])
    n_steps = int(math.ceil(duration / step - 1e-12)) if duration > 0 else 0
    cur = s
    for k in range(n_steps):
        h = min(step, duration - k * step)
        if thrust_schedule is None:
            thrust = np.zeros(3)
        elif callable(thrust_schedule):
            thrust = np.asarray(thrust_schedule(k, cur), dtype=float)
        else:
            thrust = np.asarray(thrust_schedule, dtype=float)
        if burn_window is not None and 0 < burn_window < h and np.any(thrust):
            res = rk4_step_info(cur, burn_window, thrust, props, cfg)
            res2 = rk4_step_info(res.state, h - burn_window, np.zeros(3), props, cfg)
            nxt, ex = res2.state, res.fuel_exhausted
        else:
            if burn_window is not None and burn_window <= 0:
                thrust = np.zeros(3)
            res = rk4_step_info(cur, h, thrust, props, cfg)
            nxt, ex = res.state, res.fuel_exhausted
        traj.fuel_exhausted |= ex
        traj.states.append(nxt)
        cur = nxt
        if np.linalg.norm(cur.r) < cfg.earth_radius:
            traj.deorbited = True
            break
    return traj


# --- analytic two-body reference ---------------------------------------------

class KeplerOrbit:
    """Exact two-body motion from a reference state (elements computed once)."""

    def __init__(self, c: CartesianState, mu: float = MU_EARTH):
        k = cartesian_to_keplerian(c, mu, "mean")
        self.mu = mu
        self.epoch = c.epoch
        self.a, self.e, self.M0 = k.a, k.e, k.anomaly
        self.n = math.sqrt(mu / k.a**3)
        self._b = k.a * math.sqrt(1.0 - k.e**2)
        self._rot = _rotation_pqw_to_eci(k.i, k.omega, k.Omega)

    def states(self, times):
        """Positions and velocities at ``times`` seconds after the reference epoch."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        a, e = self.a, self.e
        E = solve_kepler(self.M0 + self.n * times, e)
        cE, sE = np.cos(E), np.sin(E)
        rr = a * (1.0 - e * cE)
        sq = math.sqrt(self.mu * a)
        pqw_r = np.stack([a * (cE - e), self._b * sE, np.zeros_like(E)], axis=-1)
        pqw_v = np.stack([-sq * sE / rr, sq * math.sqrt(1.0 - e * e) * cE / rr, np.zeros_like(E)], axis=-1)
        return pqw_r @ self._rot.T, pqw_v @ self._rot.T


def kepler_propagate(c: CartesianState, times, mu: float = MU_EARTH):
    """Exact two-body positions and velocities at ``times`` (s, relative to c).

    Returns arrays of shape (len(times), 3).
    """
    return KeplerOrbit(c, mu).states(times)


def specific_energy(r, v, mu: float = MU_EARTH):
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    return 0.5 * np.sum(v * v, axis=-1) - mu / np.linalg.norm(r, axis=-1)


def orbital_period(a: float, mu: float = MU_EARTH) -> float:
    return 2.0 * math.pi * math.sqrt(a**3 / mu)
