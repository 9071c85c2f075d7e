"""Linearized covariance propagation and Gaussian sampling of body states."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .constants import MU_EARTH


@dataclass(frozen=True)
class StateCovariance:
    """6x6 covariance over (x, y, z, vx, vy, vz)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (6, 6):
            raise ValueError(f"covariance must be 6x6, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("covariance has non-finite entries")
        scale = max(np.max(np.abs(m)), 1e-300)
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        m = 0.5 * (m + m.T)
        tr = np.trace(m)
        if np.min(np.linalg.eigvalsh(m)) < -1e-9 * max(tr, 0.0) - 1e-300:
            raise ValueError("covariance is not positive semi-definite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_sigmas(cls, sigmas) -> "StateCovariance":
        s = np.asarray(sigmas, dtype=float).reshape(6)
        if np.any(s < 0):
            raise ValueError("standard deviations must be non-negative")
        return cls(np.diag(s**2))

    @property
    def position_block(self) -> np.ndarray:
        return self.matrix[:3, :3]


@dataclass(frozen=True)
class StateDistribution:
    mean: np.ndarray
    sigma: Optional[np.ndarray] = None
    covariance: Optional[StateCovariance] = None

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float).reshape(6))
        if self.covariance is None:
            sig = np.zeros(6) if self.sigma is None else np.asarray(self.sigma, dtype=float).reshape(6)
            if np.any(sig < 0) or not np.all(np.isfinite(sig)):
                raise ValueError("standard deviations must be finite and non-negative")
            object.__setattr__(self, "sigma", sig)
        elif not isinstance(self.covariance, StateCovariance):
            object.__setattr__(self, "covariance", StateCovariance(self.covariance))

    def covariance_matrix(self) -> np.ndarray:
        if self.covariance is not None:
            return self.covariance.matrix
        return np.diag(self.sigma**2)


def gravity_jacobian(r, mu: float = MU_EARTH) -> np.ndarray:
    """Jacobian of (r_dot, v_dot) for point-mass gravity.

    Accepts a single position (3,) or a batch (N, 3).
    """
    r = np.asarray(r, dtype=float)
    batch = r.ndim == 2
    rb = r.reshape(-1, 3)
    rn = np.linalg.norm(rb, axis=1)
    if np.any(rn == 0):
        raise ValueError("jacobian undefined at zero radius")
    G = mu * (3.0 * np.einsum("ni,nj->nij", rb, rb) / rn[:, None, None] ** 5
              - np.eye(3)[None] / rn[:, None, None] ** 3)
    A = np.zeros((len(rb), 6, 6))
    A[:, 0:3, 3:6] = np.eye(3)
    A[:, 3:6, 0:3] = G
    return A if batch else A[0]


def stm_approx(A, dt: float) -> np.ndarray:
    """First-order state transition matrix I + A dt."""
    A = np.asarray(A, dtype=float)
    return np.eye(6) + A * dt


def propagate_covariance(sigma: StateCovariance | np.ndarray, phi) -> StateCovariance:
    m = sigma.matrix if isinstance(sigma, StateCovariance) else np.asarray(sigma, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = phi @ m @ phi.T
    return StateCovariance(0.5 * (out + out.T))


def chained_stm(positions, dt: float, mu: float = MU_EARTH) -> np.ndarray:
    """Product of first-order STMs along a sampled trajectory.

    ``positions`` holds the position at the start of each substep; the
    result maps the initial deviation to the deviation after all substeps.
    """
    A = gravity_jacobian(np.atleast_2d(positions), mu)
    phis = np.eye(6)[None] + A * dt
    # pairwise tree product keeps the work vectorised; later factors go on the left
    while len(phis) > 1:
        if len(phis) % 2:
            phis = np.concatenate([phis, np.eye(6)[None]])
        phis = np.einsum("nij,njk->nik", phis[1::2], phis[0::2])
    return phis[0]


def substep_count(duration: float, max_substep: float = 10.0) -> int:
    return max(1, int(math.ceil(abs(duration) / max_substep - 1e-12)))


def body_seed(scenario_seed: int, name: str) -> int:
    """Reproducible per-body seed from the scenario seed and body name."""
    digest = hashlib.sha256(f"{int(scenario_seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def sample_state(dist: StateDistribution, rng_seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw one (r, v) from N(mean, Sigma).

    ``rng_seed`` may be an int or a ``numpy.random.Generator``.
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if dist.covariance is None:
        if not np.any(dist.sigma):
            x = dist.mean.copy()
        else:
            x = dist.mean + dist.sigma * rng.standard_normal(6)
    else:
        cov = dist.covariance.matrix
        try:
            L = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            # semi-definite: fall back to a symmetric square root
            w, V = np.linalg.eigh(cov)
            if np.min(w) < -1e-9 * max(np.trace(cov), 0.0):
                raise ValueError("covariance is not positive semi-definite")
            L = V * np.sqrt(np.clip(w, 0.0, None))
        x = dist.mean + L @ rng.standard_normal(6)
    return x[:3].copy(), x[3:].copy()
