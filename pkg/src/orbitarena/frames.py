"""Orbit representations and the local frames used to express thrust.

Cartesian states are Earth-centred inertial, SI units throughout. Keplerian
and equinoctial sets are restricted to bound (elliptical) orbits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .constants import MU_EARTH, TWO_PI
from .errors import ConvergenceError, DegenerateGeometryError

AnomalyKind = Literal["mean", "eccentric", "true"]
ANOMALY_KINDS = ("mean", "eccentric", "true")

KEPLER_TOL = 1e-13
KEPLER_MAX_ITER = 50
SINGULAR_EPS = 1e-9


def wrap_angle(x):
    """Map an angle (scalar or array) into [0, 2*pi)."""
    y = np.mod(x, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    y = np.where(y >= TWO_PI, 0.0, y)
    if np.ndim(y) == 0:
        return float(y)
    return y


@dataclass(frozen=True)
class CartesianState:
    position: np.ndarray
    velocity: np.ndarray
    epoch: float = 0.0

    def __post_init__(self):
        r = np.asarray(self.position, dtype=float).reshape(3)
        v = np.asarray(self.velocity, dtype=float).reshape(3)
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(v))):
            raise ValueError("cartesian state has non-finite components")
        if not np.linalg.norm(r) > 0.0:
            raise ValueError("position must be non-zero")
        object.__setattr__(self, "position", r)
        object.__setattr__(self, "velocity", v)


@dataclass(frozen=True)
class KeplerianElements:
    a: float
    e: float
    i: float
    omega: float
    Omega: float
    anomaly: float
    anomaly_kind: AnomalyKind = "mean"

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not 0.0 <= self.e < 1.0:
            raise ValueError(f"only elliptical orbits are supported (e={self.e})")
        if not 0.0 <= self.i <= math.pi:
            raise ValueError(f"inclination must lie in [0, pi], got {self.i}")
        if self.anomaly_kind not in ANOMALY_KINDS:
            raise ValueError(f"unknown anomaly kind {self.anomaly_kind!r}")
        for name in ("omega", "Omega", "anomaly"):
            object.__setattr__(self, name, wrap_angle(float(getattr(self, name))))

    def with_anomaly(self, kind: AnomalyKind) -> "KeplerianElements":
        value = convert_anomaly(self.anomaly, self.anomaly_kind, kind, self.e)
        return KeplerianElements(self.a, self.e, self.i, self.omega, self.Omega, value, kind)


@dataclass(frozen=True)
class EquinoctialElements:
    a: float
    ex: float
    ey: float
    hx: float
    hy: float
    M: float

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"semi-major axis must be positive, got {self.a}")
        if not self.ex**2 + self.ey**2 < 1.0:
            raise ValueError("eccentricity vector must have norm < 1")
        object.__setattr__(self, "M", wrap_angle(float(self.M)))

    def as_array(self) -> np.ndarray:
        """(a, ex, ey, hx, hy, M)."""
        return np.array([self.a, self.ex, self.ey, self.hx, self.hy, self.M])


@dataclass(frozen=True)
class RswBasis:
    r_hat: np.ndarray
    s_hat: np.ndarray
    w_hat: np.ndarray

    def matrix(self) -> np.ndarray:
        """Columns are (R, S, W); maps RSW components to inertial."""
        return np.column_stack([self.r_hat, self.s_hat, self.w_hat])


@dataclass(frozen=True)
class PolarThrust:
    T: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if not self.T >= 0:
            raise ValueError(f"thrust magnitude must be non-negative, got {self.T}")
        # planar missions steer over the full circle, so theta is allowed up to 2*pi
        if not 0.0 <= self.theta <= TWO_PI:
            raise ValueError(f"theta out of range: {self.theta}")
        object.__setattr__(self, "phi", wrap_angle(float(self.phi)))


# --- anomalies -------------------------------------------------------------

def solve_kepler(M, e):
    """Eccentric anomaly from mean anomaly by Newton iteration.

    Works on scalars or arrays. The starting guess is ``M`` (``pi`` when
    ``e > 0.8``).
    """
    M = np.asarray(M, dtype=float)
    e = np.asarray(e, dtype=float)
    if np.any(e < 0) or np.any(e >= 1):
        raise ValueError("Kepler's equation requires 0 <= e < 1")
    Mw = np.mod(M, TWO_PI)
    E = np.where(e > 0.8, math.pi, Mw) * np.ones_like(Mw + e)
    for _ in range(KEPLER_MAX_ITER):
        f = E - e * np.sin(E) - Mw
        step = f / (1.0 - e * np.cos(E))
        E = E - step
        if np.all(np.abs(step) < KEPLER_TOL):
            break
    else:
        raise ConvergenceError(f"Kepler solve did not converge in {KEPLER_MAX_ITER} iterations")
    return E


def _eccentric_to_true(E, e):
    return 2.0 * np.arctan2(np.sqrt(1.0 + e) * np.sin(E / 2.0), np.sqrt(1.0 - e) * np.cos(E / 2.0))


def _true_to_eccentric(nu, e):
    return 2.0 * np.arctan2(np.sqrt(1.0 - e) * np.sin(nu / 2.0), np.sqrt(1.0 + e) * np.cos(nu / 2.0))


def convert_anomaly(value, kind_from: str, kind_to: str, e):
    """Convert an anomaly between mean, eccentric and true forms.

    Scalars and arrays are accepted; results are wrapped to [0, 2*pi).
    """
    if kind_from not in ANOMALY_KINDS or kind_to not in ANOMALY_KINDS:
        raise ValueError(f"unknown anomaly kind: {kind_from!r} -> {kind_to!r}")
    if np.any(np.asarray(e) < 0) or np.any(np.asarray(e) >= 1):
        raise ValueError("anomaly conversion requires 0 <= e < 1")
    x = np.asarray(value, dtype=float)
    if kind_from == kind_to:
        return wrap_angle(x)
    if kind_from == "mean":
        E = solve_kepler(x, e)
    elif kind_from == "true":
        E = _true_to_eccentric(x, e)
    else:
        E = x
    if kind_to == "eccentric":
        out = E
    elif kind_to == "true":
        out = _eccentric_to_true(E, e)
    else:
        out = E - e * np.sin(E)
    return wrap_angle(out)


# --- element conversions -----------------------------------------------------

def _rotation_pqw_to_eci(i, omega, Omega):
    cO, sO = math.cos(Omega), math.sin(Omega)
    co, so = math.cos(omega), math.sin(omega)
    ci, si = math.cos(i), math.sin(i)
    return np.array([
        [cO * co - sO * so * ci, -cO * so - sO * co * ci, sO * si],
        [sO * co + cO * so * ci, -sO * so + cO * co * ci, -cO * si],
        [so * si, co * si, ci],
    ])


def keplerian_to_cartesian(k: KeplerianElements, mu: float = MU_EARTH, epoch: float = 0.0) -> CartesianState:
    """Perifocal construction followed by the (Omega, i, omega) 3-1-3 rotation."""
    nu = convert_anomaly(k.anomaly, k.anomaly_kind, "true", k.e)
    p = k.a * (1.0 - k.e**2)
    cn, sn = math.cos(nu), math.sin(nu)
    r_pf = np.array([cn, sn, 0.0]) * (p / (1.0 + k.e * cn))
    v_pf = np.array([-sn, k.e + cn, 0.0]) * math.sqrt(mu / p)
    rot = _rotation_pqw_to_eci(k.i, k.omega, k.Omega)
    return CartesianState(rot @ r_pf, rot @ v_pf, epoch)


def cartesian_to_keplerian(c: CartesianState, mu: float = MU_EARTH,
                           anomaly_kind: AnomalyKind = "true") -> KeplerianElements:
    """Classical elements of a bound orbit.

    Singular cases are canonicalized: ``omega = 0`` when ``e < 1e-9`` and
    ``Omega = 0`` when ``i < 1e-9``; the anomaly absorbs the difference so
    the position is preserved.
    """
    r, v = c.position, c.velocity
    rn = float(np.linalg.norm(r))
    v2 = float(v @ v)
    energy = 0.5 * v2 - mu / rn
    if energy >= 0:
        raise ValueError("state is not on a bound orbit (specific energy >= 0)")
    h = np.cross(r, v)
    hn = float(np.linalg.norm(h))
    if hn <= 1e-12 * rn * math.sqrt(v2):
        raise DegenerateGeometryError("rectilinear state: position parallel to velocity")
    a = -mu / (2.0 * energy)
    i = math.atan2(math.hypot(h[0], h[1]), h[2])
    h_hat = h / hn
    if i < SINGULAR_EPS:
        Omega = 0.0
        n_hat = np.array([1.0, 0.0, 0.0])
    else:
        Omega = math.atan2(h[0], -h[1])
        n_hat = np.array([math.cos(Omega), math.sin(Omega), 0.0])
    m_hat = np.cross(h_hat, n_hat)
    u = math.atan2(float(r @ m_hat), float(r @ n_hat))
    rv = float(r @ v)
    ecos = hn * hn / (mu * rn) - 1.0
    esin = rv * hn / (mu * rn)
    e = math.hypot(ecos, esin)
    if e >= 1.0:
        raise ValueError("state is not elliptical")
    if e < SINGULAR_EPS:
        omega, nu = 0.0, u
    else:
        nu = math.atan2(esin, ecos)
        omega = u - nu
    anomaly = convert_anomaly(nu, "true", anomaly_kind, e)
    return KeplerianElements(a, e, i, omega, Omega, anomaly, anomaly_kind)


def keplerian_to_equinoctial(k: KeplerianElements) -> EquinoctialElements:
    if k.i >= math.pi:
        raise ValueError("equinoctial elements are singular for i = pi")
    M = convert_anomaly(k.anomaly, k.anomaly_kind, "mean", k.e)
    lon_peri = k.omega + k.Omega
    t = math.tan(k.i / 2.0)
    return EquinoctialElements(
        a=k.a,
        ex=k.e * math.cos(lon_peri),
        ey=k.e * math.sin(lon_peri),
        hx=t * math.cos(k.Omega),
        hy=t * math.sin(k.Omega),
        M=M,
    )


def equinoctial_to_keplerian(q: EquinoctialElements) -> KeplerianElements:
    e = math.hypot(q.ex, q.ey)
    tan_half = math.hypot(q.hx, q.hy)
    i = 2.0 * math.atan(tan_half)
    Omega = math.atan2(q.hy, q.hx) if i >= SINGULAR_EPS else 0.0
    lon_peri = math.atan2(q.ey, q.ex)
    omega = lon_peri - Omega
    M = q.M
    if e < SINGULAR_EPS:
        # periapsis undefined: keep the mean longitude, drop omega
        M = M + omega
        omega = 0.0
    return KeplerianElements(q.a, e, i, omega, Omega, M, "mean")


def cartesian_to_equinoctial(c: CartesianState, mu: float = MU_EARTH) -> EquinoctialElements:
    return keplerian_to_equinoctial(cartesian_to_keplerian(c, mu, "mean"))


def equinoctial_to_cartesian(q: EquinoctialElements, mu: float = MU_EARTH, epoch: float = 0.0) -> CartesianState:
    return keplerian_to_cartesian(equinoctial_to_keplerian(q), mu, epoch)


# --- local frames and thrust -------------------------------------------------

def rsw_basis(c: CartesianState) -> RswBasis:
    """Radial / along-track / cross-track unit vectors of a state."""
    r, v = c.position, c.velocity
    h = np.cross(r, v)
    hn = np.linalg.norm(h)
    if hn <= 1e-12 * np.linalg.norm(r) * np.linalg.norm(v) or hn == 0.0:
        raise DegenerateGeometryError("RSW frame undefined: velocity parallel to position")
    r_hat = r / np.linalg.norm(r)
    w_hat = h / hn
    s_hat = np.cross(w_hat, r_hat)
    return RswBasis(r_hat, s_hat, w_hat)


def polar_to_rsw(t: PolarThrust, basis: RswBasis) -> np.ndarray:
    """Inertial thrust vector, Newtons: T (cos th S + sin th (cos ph R + sin ph W))."""
    st = math.sin(t.theta)
    return t.T * (math.cos(t.theta) * basis.s_hat
                  + st * (math.cos(t.phi) * basis.r_hat + math.sin(t.phi) * basis.w_hat))
