"""Short-term encounter analysis: TCA, encounter-plane geometry and PoC."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, erfcx

from .errors import ConvergenceError, DegenerateGeometryError
from .frames import CartesianState

RISK_THRESHOLD = 1e-6


@dataclass(frozen=True)
class RelativeState:
    """Target minus chaser position and velocity."""

    r: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r", np.asarray(self.r, dtype=float).reshape(3))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float).reshape(3))

    @classmethod
    def between(cls, target: CartesianState, chaser: CartesianState) -> "RelativeState":
        return cls(target.position - chaser.position, target.velocity - chaser.velocity)


@dataclass(frozen=True)
class ConjunctionGeometry:
    Q: np.ndarray
    C: np.ndarray
    mu2: np.ndarray
    sigma2: np.ndarray
    combined_radius: float
    receding: bool = False


@dataclass(frozen=True)
class PocResult:
    value: float
    abs_error_estimate: float


def time_of_closest_approach(rel: RelativeState) -> float:
    """Time at which the straight-line relative motion is closest."""
    vv = float(rel.v @ rel.v)
    if vv == 0.0:
        raise ValueError("relative velocity is zero; closest approach undefined")
    return -float(rel.r @ rel.v) / vv


def miss_distance(rel: RelativeState, clamp: bool = False) -> float:
    """Distance at closest approach; with ``clamp`` a receding pair reports ‖r‖."""
    tca = time_of_closest_approach(rel)
    if clamp and tca <= 0:
        return float(np.linalg.norm(rel.r))
    return float(np.linalg.norm(rel.r + tca * rel.v))


def rtn_basis(chaser: CartesianState) -> np.ndarray:
    """Rotation whose rows are the radial, transverse and normal unit vectors."""
    r, v = chaser.position, chaser.velocity
    h = np.cross(r, v)
    hn = np.linalg.norm(h)
    if hn <= 1e-12 * np.linalg.norm(r) * max(np.linalg.norm(v), 1e-300):
        raise DegenerateGeometryError("chaser position and velocity are parallel")
    R = r / np.linalg.norm(r)
    N = h / hn
    T = np.cross(N, R)
    return np.vstack([R, T, N])


def _position_cov(sigma) -> np.ndarray:
    m = np.asarray(getattr(sigma, "matrix", sigma), dtype=float)
    if m.shape == (6, 6):
        m = m[:3, :3]
    if m.shape != (3, 3):
        raise ValueError("covariance must be 3x3 (position) or 6x6")
    return m


def conjunction_geometry(target: CartesianState, chaser: CartesianState, sigma_T, sigma_C,
                         R_T: float, R_C: float, parallel: str = "raise",
                         clamp: bool = False) -> ConjunctionGeometry:
    """Project the encounter onto the plane normal to the relative velocity.

    The in-plane axes are J = (v_T x v_C)/|.| and K = I x J with I along the
    relative velocity, all expressed in the chaser's RTN frame. When the two
    velocities are (anti)parallel J is undefined: ``parallel="raise"``
    rejects the geometry, ``parallel="fallback"`` picks J as the component of
    the RTN normal orthogonal to I (PoC only depends on the plane, not on
    the in-plane orientation).

    With ``clamp=True`` and a receding pair, ``mu2`` is taken from the
    current separation and ``receding`` is set.
    """
    if R_T <= 0 or R_C <= 0:
        raise ValueError("radii must be positive")
    Q = rtn_basis(chaser)
    r_rel = Q @ (target.position - chaser.position)
    vT = Q @ target.velocity
    vC = Q @ chaser.velocity
    v_rel = vT - vC
    vn = np.linalg.norm(v_rel)
    if vn == 0:
        raise DegenerateGeometryError("zero relative velocity: non-crossing geometry")
    I = v_rel / vn
    J = np.cross(vT, vC)
    jn = np.linalg.norm(J)
    if jn <= 1e-10 * np.linalg.norm(vT) * np.linalg.norm(vC):
        if parallel != "fallback":
            raise DegenerateGeometryError("parallel velocities: non-crossing geometry")
        ref = np.array([0.0, 0.0, 1.0])
        if abs(ref @ I) > 0.9:
            ref = np.array([0.0, 1.0, 0.0])
        J = ref - (ref @ I) * I
        jn = np.linalg.norm(J)
    J = J / jn
    K = np.cross(I, J)
    C = np.column_stack([J, K])
    receding = False
    if clamp and float(r_rel @ v_rel) > 0:
        receding = True
    cov = Q @ (_position_cov(sigma_T) + _position_cov(sigma_C)) @ Q.T
    sigma2 = C.T @ cov @ C
    sigma2 = 0.5 * (sigma2 + sigma2.T)
    return ConjunctionGeometry(Q=Q, C=C, mu2=C.T @ r_rel, sigma2=sigma2,
                               combined_radius=float(R_T + R_C), receding=receding)


def _radial_integrals(theta, P, mu, R):
    """∫_0^R exp(-q(ρu)/2) ρ dρ for each direction u(θ), q(x)=(x-μ)ᵀP(x-μ)."""
    u = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    Pu = u @ P
    alpha = np.einsum("ni,ni->n", Pu, u)
    beta = Pu @ mu
    gamma = float(mu @ P @ mu)
    c = beta / alpha
    a = np.sqrt(alpha / 2.0)
    qR = alpha * R * R - 2.0 * beta * R + gamma
    eg = math.exp(-gamma / 2.0)
    eR = np.exp(-qR / 2.0)
    first = (eg - eR) / alpha
    # K * (erf(a(R-c)) + erf(ac)), K = exp(-(gamma - beta^2/alpha)/2), evaluated
    # through erfcx in the tails so nothing overflows or cancels
    ks = np.empty_like(c)
    hi = c >= R
    lo = c <= 0
    mid = ~(hi | lo)
    ks[hi] = eR[hi] * erfcx(a[hi] * (c[hi] - R)) - eg * erfcx(a[hi] * c[hi])
    ks[lo] = eg * erfcx(-a[lo] * c[lo]) - eR[lo] * erfcx(a[lo] * (R - c[lo]))
    if np.any(mid):
        K = np.exp(-0.5 * (gamma - beta[mid] ** 2 / alpha[mid]))
        ks[mid] = K * (erf(a[mid] * (R - c[mid])) + erf(a[mid] * c[mid]))
    return first + c * np.sqrt(np.pi / (2.0 * alpha)) * ks


def probability_of_collision(geom: ConjunctionGeometry, tol: float = 1e-10,
                             max_nodes: int = 1 << 20) -> PocResult:
    """Integral of the 2D Gaussian encounter density over the collision disk.

    The radial integral is evaluated in closed form; the angular integral of
    the resulting smooth periodic function uses the trapezoid rule with node
    doubling until two successive refinements agree within ``tol``.
    """
    S = np.asarray(geom.sigma2, dtype=float)
    mu = np.asarray(geom.mu2, dtype=float)
    R = float(geom.combined_radius)
    det = float(np.linalg.det(S))
    w = np.linalg.eigvalsh(S)
    if not det > 0 or w[0] <= 1e-14 * w[1]:
        raise ValueError("encounter covariance is singular")
    P = np.linalg.inv(S)
    P = 0.5 * (P + P.T)
    norm = 1.0 / (2.0 * math.pi * math.sqrt(det))
    # start fine enough to resolve the angular width of an elongated ellipse
    aspect = math.sqrt(w[1] / w[0])
    n = 32
    while n < min(8.0 * aspect, max_nodes / 4):
        n *= 2
    theta = 2.0 * math.pi * np.arange(n) / n
    total = _radial_integrals(theta, P, mu, R).sum()
    prev = norm * 2.0 * math.pi * total / n
    streak = 0
    while n < max_nodes:
        # add the midpoints of the current grid
        mids = 2.0 * math.pi * (np.arange(n) + 0.5) / n
        total += _radial_integrals(mids, P, mu, R).sum()
        n *= 2
        cur = norm * 2.0 * math.pi * total / n
        err = abs(cur - prev)
        prev = cur
        if err <= tol:
            streak += 1
            if streak >= 2:
                return PocResult(float(min(max(cur, 0.0), 1.0)), float(err))
        else:
            streak = 0
    raise ConvergenceError(f"PoC quadrature did not reach tolerance {tol} with {n} nodes")


def assess(target: CartesianState, chaser: CartesianState, sigma_T, sigma_C, R_T: float,
           R_C: float, threshold: float = RISK_THRESHOLD, tol: float = 1e-10) -> dict:
    """TCA, miss distance and PoC for a pair, with forward-window clamping."""
    rel = RelativeState.between(target, chaser)
    tca = time_of_closest_approach(rel)
    receding = tca < 0
    geom = conjunction_geometry(target, chaser, sigma_T, sigma_C, R_T, R_C,
                                parallel="fallback", clamp=True)
    poc = probability_of_collision(geom, tol)
    return {
        "tca": max(tca, 0.0),
        "miss_distance": miss_distance(rel, clamp=True),
        "poc": poc.value,
        "poc_error": poc.abs_error_estimate,
        "receding": receding,
        "high_risk": poc.value > threshold,
    }
