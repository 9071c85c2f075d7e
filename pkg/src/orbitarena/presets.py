"""Scenario documents for the built-in missions."""
from __future__ import annotations

import copy
import math

from .constants import R_EARTH

DEG = math.pi / 180.0

# calibrated so an unmaneuvered 550 km circular orbit leaves the 1 m band near step 200
HERRERA_DRAG = {"rho0": 6.5e-13, "h0_m": 550e3, "scale_height_m": 88667.0}


def _kolosa():
    return {
        "bodies": [{
            "name": "satellite", "dry_mass_kg": 500.0, "fuel_kg": 150.0, "radius_m": 1.0, "isp_s": 3100.0,
            "elements": {"type": "equinoctial", "a_m": 5500e3 + R_EARTH, "ex": 0.153, "ey": 0.128,
                         "hx": 0.041, "hy": 0.015, "M_rad": 10 * DEG},
            "sigma": [0.0] * 6,
            "thrust": {"t_max_n": 0.6, "theta_max_rad": math.pi, "phi_max_rad": 2 * math.pi},
        }],
        "forces": {"enable_j2": False, "enable_drag": False},
        "mission": {"id": "kolosa_transfer", "params": {
            "alphas": [1.0, 1.0, 1.0, 10.0, 10.0],
            "target": {"a_m": 6300e3 + R_EARTH, "ex": 0.154, "ey": 0.171, "hx": 0.042, "hy": 0.019}}},
        "stepping": {"step_s": 500.0, "episode_steps": 692, "integrator_step_s": 50.0},
        "seed": 0,
    }


def _herrera():
    r = R_EARTH + 550e3
    return {
        "bodies": [{
            "name": "satellite", "dry_mass_kg": 25.0, "fuel_kg": 75.0, "radius_m": 16.8, "cd": 2.123,
            "isp_s": 0.0067,
            "elements": {"type": "keplerian", "a_m": r, "e": 0.0, "i_rad": 0.0, "omega_rad": 0.0,
                         "raan_rad": 0.0, "anomaly_rad": 0.0},
            "sigma": [0.0] * 6,
            "thrust": {"t_max_n": 0.04, "theta_max_rad": 2 * math.pi},
        }],
        "forces": {"enable_j2": False, "enable_drag": True, "drag": dict(HERRERA_DRAG)},
        "mission": {"id": "herrera_sk", "params": {"r_nominal_m": r, "tolerance_m": 1.0, "max_steps": 800}},
        "stepping": {"step_s": 1.0, "episode_steps": 800},
        "seed": 0,
    }


def _hohmann(alpha2: float = 0.0):
    return {
        "bodies": [{
            "name": "satellite", "dry_mass_kg": 200.0, "fuel_kg": 50.0, "radius_m": 1.0, "isp_s": 310.0,
            "elements": {"type": "equinoctial", "a_m": 2000e3 + R_EARTH, "ex": 0.007, "ey": 0.006,
                         "hx": 0.041, "hy": 0.015, "M_rad": 0.0},
            "sigma": [1.0, 1.0, 1.0, 0.001, 0.001, 0.001],
            "thrust": {"t_max_n": 500.0, "theta_max_rad": math.pi, "phi_max_rad": 2 * math.pi,
                       "decision_flag": True},
        }],
        "forces": {"enable_j2": False, "enable_drag": False},
        "mission": {"id": "hohmann", "params": {
            "w": [1e3, 1.0, 1.0, 10.0, 10.0, 1e-3], "alpha1": 1.0, "alpha2": alpha2,
            "target": {"a_m": 2030e3 + R_EARTH, "ex": 0.007, "ey": 0.006, "hx": 0.041, "hy": 0.015},
            "tolerances": [100.0, 0.005, 0.005, 0.001, 0.001]}},
        "stepping": {"step_s": 5.0, "episode_steps": 1000},
        "seed": 0,
    }


def _chase():
    return {
        "bodies": [
            {
                "name": "follower", "dry_mass_kg": 500.0, "fuel_kg": 150.0, "radius_m": 5.0, "isp_s": 3000.0,
                "elements": {"type": "keplerian", "a_m": 10000e3 + R_EARTH, "e": 0.1, "i_rad": 5 * DEG,
                             "omega_rad": 10 * DEG, "raan_rad": 10 * DEG, "anomaly_rad": 10 * DEG},
                "sigma": [0.0] * 6,
                "thrust": {"t_max_n": 30.0, "theta_max_rad": math.pi, "phi_max_rad": 2 * math.pi},
            },
            {
                "name": "leader", "dry_mass_kg": 500.0, "radius_m": 5.0,
                "elements": {"type": "keplerian", "a_m": 40000e3 + R_EARTH, "e": 0.001, "i_rad": 5 * DEG,
                             "omega_rad": 10 * DEG, "raan_rad": 10 * DEG, "anomaly_rad": 10 * DEG},
                "sigma": [0.0] * 6,
            },
        ],
        "forces": {"enable_j2": False, "enable_drag": False},
        "mission": {"id": "chase", "params": {"alphas": [1.0, 1e-3, 1e-3, 1e-2, 1e-2, 1e-6],
                                              "leader": "leader"}},
        "stepping": {"step_s": 500.0, "episode_steps": 2000, "integrator_step_s": 50.0},
        "seed": 0,
    }


def _cam():
    el = {"type": "keplerian", "a_m": 2000e3 + R_EARTH, "e": 0.01, "i_rad": 5 * DEG, "omega_rad": 20 * DEG,
          "raan_rad": 20 * DEG, "anomaly_rad": 10 * DEG}
    sigma = [0.1, 0.1, 0.1, 0.1, 0.1, 0.1]
    return {
        "bodies": [
            {
                "name": "satellite", "dry_mass_kg": 200.0, "fuel_kg": 50.0, "radius_m": 10.0, "isp_s": 3100.0,
                "elements": dict(el), "sigma": list(sigma),
                "thrust": {"t_max_n": 5.0, "theta_max_rad": math.pi, "phi_max_rad": 2 * math.pi,
                           "decision_flag": True},
            },
            {
                "name": "drifter", "dry_mass_kg": 100.0, "radius_m": 5.0,
                "elements": {**el, "reverse_velocity": True}, "sigma": list(sigma),
            },
        ],
        "forces": {"enable_j2": False, "enable_drag": True},
        "mission": {"id": "cam", "params": {"w": [10.0, 1e-2, 1e-2, 1e-1, 1e-1], "alpha1": 1.0, "alpha2": 0.1,
                                            "threshold": 1e-6, "drifter": "drifter",
                                            "backward_s": 2 * 86400.0, "steps_after_tca": 10}},
        "stepping": {"step_s": 900.0, "episode_steps": 202, "burn_window_s": 10.0, "integrator_step_s": 10.0},
        "seed": 0,
    }


def _geo(n_agents: int = 4):
    bodies = []
    for k in range(n_agents):
        bodies.append({
            "name": f"sat_{k}", "dry_mass_kg": 200.0, "fuel_kg": 50.0, "radius_m": 1.0, "isp_s": 3100.0,
            "elements": {"type": "equinoctial", "a_m": 42164e3, "ex": 0.0, "ey": 0.0, "hx": 0.0, "hy": 0.0,
                         "M_rad": 2 * math.pi * k / n_agents},
            "sigma": [0.0] * 6,
            "thrust": {"t_max_n": 5.0, "theta_max_rad": 2 * math.pi},
        })
    return {
        "bodies": bodies,
        "forces": {"enable_j2": False, "enable_drag": False},
        "mission": {"id": "geo_constellation", "params": {"alphas": [1e-8, 10.0, 1e-2], "a_geo_m": 42164e3}},
        "stepping": {"step_s": 360.0, "episode_steps": 500, "integrator_step_s": 60.0},
        "seed": 0,
    }


PRESETS = {
    "kolosa_transfer": _kolosa,
    "herrera_sk": _herrera,
    "hohmann": _hohmann,
    "chase": _chase,
    "cam": _cam,
    "geo_constellation": _geo,
}


def preset_document(name: str, **kw) -> dict:
    """A fresh copy of a built-in scenario document."""
    try:
        return copy.deepcopy(PRESETS[name](**kw))
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def circular_document(altitude_m: float = 622e3, name: str = "sat", steps: int = 10, step_s: float = 60.0) -> dict:
    """Single uncontrolled body on a circular equatorial orbit."""
    return {
        "bodies": [{
            "name": name, "dry_mass_kg": 100.0, "radius_m": 1.0,
            "elements": {"type": "keplerian", "a_m": R_EARTH + altitude_m, "e": 0.0, "i_rad": 0.0,
                         "omega_rad": 0.0, "raan_rad": 0.0, "anomaly_rad": 0.0},
        }],
        "stepping": {"step_s": step_s, "episode_steps": steps},
    }
