"""Low-fidelity encounter prediction between two bodies.

Both bodies are propagated with exact two-body motion over a look-ahead
window, the closest approach is located on a coarse grid and refined with the
linear TCA formula, and the current covariances are carried to that epoch by
chained first-order state transition matrices.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conjunction import ConjunctionGeometry, conjunction_geometry, probability_of_collision
from .constants import MU_EARTH
from .dynamics import KeplerOrbit
from .frames import CartesianState
from .uncertainty import chained_stm, gravity_jacobian


@dataclass(frozen=True)
class Encounter:
    tca: float
    miss_distance: float
    poc: float
    receding: bool
    target: CartesianState
    chaser: CartesianState
    geometry: ConjunctionGeometry


def _as_cov6(sigma) -> np.ndarray:
    s = np.asarray(getattr(sigma, "matrix", sigma), dtype=float)
    if s.shape == (6,):
        return np.diag(s**2)
    if s.shape != (6, 6):
        raise ValueError("expected 6 standard deviations or a 6x6 covariance")
    return s


def closest_approach_time(orbit_a: KeplerOrbit, orbit_b: KeplerOrbit, horizon: float,
                          grid_step: float = 60.0, n_candidates: int = 8) -> float:
    """Time in [0, horizon] of the smallest separation between two two-body orbits."""
    if horizon <= 0:
        return 0.0
    n = max(2, int(math.ceil(horizon / grid_step)) + 1)
    times = np.linspace(0.0, horizon, n)
    d = np.linalg.norm(orbit_a.states(times)[0] - orbit_b.states(times)[0], axis=1)
    left = np.r_[True, d[1:] <= d[:-1]]
    right = np.r_[d[:-1] <= d[1:], True]
    minima = np.flatnonzero(left & right)
    minima = minima[np.argsort(d[minima], kind="stable")][:n_candidates]
    lo = times[np.maximum(minima - 1, 0)]
    hi = times[np.minimum(minima + 1, n - 1)]
    t = times[minima]
    for _ in range(12):
        ra, va = orbit_a.states(t)
        rb, vb = orbit_b.states(t)
        dr, dv = ra - rb, va - vb
        vv = np.einsum("ij,ij->i", dv, dv)
        step = np.where(vv > 0, -np.einsum("ij,ij->i", dr, dv) / np.where(vv > 0, vv, 1.0), 0.0)
        t_new = np.clip(t + step, lo, hi)
        done = np.max(np.abs(t_new - t)) < 1e-7
        t = t_new
        if done:
            break
    dist = np.linalg.norm(orbit_a.states(t)[0] - orbit_b.states(t)[0], axis=1)
    return float(t[int(np.argmin(dist))])


def propagate_covariance_kepler(state: CartesianState, sigma, duration: float, mu: float = MU_EARTH,
                                max_substep: float = 10.0) -> np.ndarray:
    """Covariance after ``duration`` seconds along the two-body trajectory."""
    cov = _as_cov6(sigma)
    if duration <= 0:
        return cov
    n = max(1, int(math.ceil(duration / max_substep - 1e-12)))
    dt = duration / n
    pos, _ = KeplerOrbit(state, mu).states(dt * np.arange(n))
    phi = chained_stm(pos, dt, mu)
    out = phi @ cov @ phi.T
    return 0.5 * (out + out.T)


class StmCache:
    """First-order STM products along a reference two-body trajectory.

    Queries from states that lie on the cached trajectory (within
    ``pos_tol`` / ``vel_tol`` and on the substep grid) reuse the running
    products; anything else rebuilds the reference from the query state.
    """

    def __init__(self, mu: float = MU_EARTH, substep: float = 10.0, pos_tol: float = 1.0,
                 vel_tol: float = 1e-3):
        self.mu, self.substep, self.pos_tol, self.vel_tol = mu, substep, pos_tol, vel_tol
        self._orbit: Optional[KeplerOrbit] = None
        self._prefix = np.eye(6)[None]
        self.rebuilds = 0

    def _matches(self, state: CartesianState) -> Optional[int]:
        if self._orbit is None:
            return None
        dt = state.epoch - self._orbit.epoch
        k = round(dt / self.substep)
        if k < 0 or abs(dt - k * self.substep) > 1e-6:
            return None
        r, v = self._orbit.states([dt])
        if np.linalg.norm(r[0] - state.position) > self.pos_tol or \
                np.linalg.norm(v[0] - state.velocity) > self.vel_tol:
            return None
        return int(k)

    def _extend(self, upto: int) -> None:
        have = len(self._prefix) - 1
        if upto <= have:
            return
        upto = max(upto, have + 512)
        idx = np.arange(have, upto)
        pos, _ = self._orbit.states(idx * self.substep)
        phis = np.eye(6)[None] + gravity_jacobian(pos, self.mu) * self.substep
        out = np.empty((upto + 1, 6, 6))
        out[:have + 1] = self._prefix
        cur = self._prefix[-1]
        for j, phi in enumerate(phis, start=have + 1):
            cur = phi @ cur
            out[j] = cur
        self._prefix = out

    def transition(self, state: CartesianState, duration: float) -> np.ndarray:
        """STM from ``state`` over ``duration`` seconds."""
        if duration <= 0:
            return np.eye(6)
        k0 = self._matches(state)
        if k0 is None:
            self._orbit = KeplerOrbit(state, self.mu)
            self._prefix = np.eye(6)[None]
            self.rebuilds += 1
            k0 = 0
        t_end = (k0 * self.substep) + duration
        k1 = int(math.floor(t_end / self.substep + 1e-9))
        self._extend(k1)
        phi = self._prefix[k1] @ np.linalg.inv(self._prefix[k0]) if k0 else self._prefix[k1].copy()
        rem = t_end - k1 * self.substep
        if rem > 1e-9:
            (pos,), _ = self._orbit.states([k1 * self.substep])
            phi = (np.eye(6) + gravity_jacobian(pos, self.mu) * rem) @ phi
        return phi

    def covariance(self, state: CartesianState, sigma, duration: float) -> np.ndarray:
        cov = _as_cov6(sigma)
        phi = self.transition(state, duration)
        out = phi @ cov @ phi.T
        return 0.5 * (out + out.T)


def predict_encounter(target: CartesianState, chaser: CartesianState, sigma_target, sigma_chaser,
                      radius_target: float, radius_chaser: float, horizon: float, mu: float = MU_EARTH,
                      grid_step: float = 60.0, cov_substep: float = 10.0, tol: float = 1e-10,
                      caches: Optional[tuple] = None) -> Encounter:
    """Closest approach within ``[0, horizon]`` seconds and its collision probability.

    A closest approach at the window start with the pair separating is
    reported as receding; miss distance and PoC then use the current
    separation. ``caches`` optionally supplies one :class:`StmCache` per body.
    """
    horizon = max(float(horizon), 0.0)
    orbit_t, orbit_c = KeplerOrbit(target, mu), KeplerOrbit(chaser, mu)
    tca = closest_approach_time(orbit_t, orbit_c, horizon, grid_step)
    if tca > 0:
        (r1,), (v1,) = orbit_t.states([tca])
        (r2,), (v2,) = orbit_c.states([tca])
        t_state = CartesianState(r1, v1, target.epoch + tca)
        c_state = CartesianState(r2, v2, chaser.epoch + tca)
    else:
        t_state, c_state = target, chaser
    dr = t_state.position - c_state.position
    dv = t_state.velocity - c_state.velocity
    receding = tca <= 0 and float(dr @ dv) > 0
    if caches is not None:
        cov_t = caches[0].covariance(target, sigma_target, tca)
        cov_c = caches[1].covariance(chaser, sigma_chaser, tca)
    else:
        cov_t = propagate_covariance_kepler(target, sigma_target, tca, mu, cov_substep)
        cov_c = propagate_covariance_kepler(chaser, sigma_chaser, tca, mu, cov_substep)
    geom = conjunction_geometry(t_state, c_state, cov_t, cov_c, radius_target, radius_chaser,
                                parallel="fallback", clamp=True)
    try:
        poc = probability_of_collision(geom, tol).value
    except ValueError:
        # degenerate (zero) covariance: the outcome is deterministic
        poc = 1.0 if np.linalg.norm(geom.mu2) <= geom.combined_radius else 0.0
    return Encounter(tca=float(tca), miss_distance=float(np.linalg.norm(dr)), poc=float(poc),
                     receding=bool(receding), target=t_state, chaser=c_state, geometry=geom)
