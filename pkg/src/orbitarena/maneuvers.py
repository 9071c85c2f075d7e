"""Analytic Hohmann transfer between circular orbits."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .constants import G0, MU_EARTH


@dataclass(frozen=True)
class HohmannSolution:
    dv1: float
    dv2: float
    transfer_time: float
    a_transfer: float
    f1: float
    f2: float
    mdot1: float
    fuel_used: float
    feasible: bool


def tsiolkovsky_capacity(m0: float, m_dry: float, isp: float) -> float:
    """Total delta-v (m/s) available from burning m0 - m_dry of propellant."""
    if not (m_dry > 0 and m0 >= m_dry):
        raise ValueError("masses must satisfy m0 >= m_dry > 0")
    if not isp > 0:
        raise ValueError("isp must be positive")
    return isp * G0 * math.log(m0 / m_dry)


def hohmann_solve(R: float, R_prime: float, mu: float = MU_EARTH, m0: float = 250.0,
                  fuel: float = 50.0, isp: float = 310.0, burn_dt: float = 5.0) -> HohmannSolution:
    """Impulsive Hohmann transfer plus the finite-burn forces that deliver it.

    Each impulse is spread over ``burn_dt`` seconds of constant thrust; the
    second burn uses the mass left after the first one.

    Raises:
        ValueError: for non-positive radii, burn time, or inconsistent masses.
    """
    if not (R > 0 and R_prime > 0):
        raise ValueError("radii must be positive")
    if not burn_dt > 0:
        raise ValueError("burn_dt must be positive")
    if not (m0 > fuel >= 0):
        raise ValueError("m0 must exceed fuel")
    s = R + R_prime
    dv1 = math.sqrt(mu / R) * (math.sqrt(2.0 * R_prime / s) - 1.0)
    dv2 = math.sqrt(mu / R_prime) * (1.0 - math.sqrt(2.0 * R / s))
    a_h = s / 2.0
    t_h = math.pi * math.sqrt(a_h**3 / mu)
    f1 = abs(dv1) * m0 / burn_dt
    mdot = f1 / (isp * G0)
    m_after = m0 - mdot * burn_dt
    f2 = abs(dv2) * m_after / burn_dt
    fuel_used = mdot * burn_dt + f2 / (isp * G0) * burn_dt
    feasible = abs(dv1) + abs(dv2) <= tsiolkovsky_capacity(m0, m0 - fuel, isp)
    return HohmannSolution(dv1, dv2, t_h, a_h, f1, f2, mdot, fuel_used, feasible)
