"""Scenario documents: JSON schema, validation and parsing into typed configs."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
from jsonschema import Draft202012Validator

from .constants import MU_EARTH, R_EARTH, TWO_PI
from .dynamics import BodyProperties, ForceConfig, DRAG_H0, DRAG_RHO0, DRAG_SCALE_HEIGHT
from .errors import ScenarioError
from .frames import (CartesianState, EquinoctialElements, KeplerianElements,
                     equinoctial_to_cartesian, keplerian_to_cartesian)

MISSION_IDS = ("none", "kolosa_transfer", "herrera_sk", "hohmann", "chase", "cam", "geo_constellation")

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_vec3 = {"type": "array", "items": _num, "minItems": 3, "maxItems": 3}

_ELEMENTS = {
    "oneOf": [
        {
            "type": "object",
            "properties": {
                "type": {"const": "keplerian"},
                "a_m": _pos, "e": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "i_rad": {"type": "number", "minimum": 0, "maximum": 3.141592653589793},
                "omega_rad": _num, "raan_rad": _num, "anomaly_rad": _num,
                "anomaly_kind": {"enum": ["mean", "eccentric", "true"]},
                "reverse_velocity": {"type": "boolean"},
            },
            "required": ["type", "a_m", "e", "i_rad", "omega_rad", "raan_rad", "anomaly_rad"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "equinoctial"},
                "a_m": _pos, "ex": _num, "ey": _num, "hx": _num, "hy": _num, "M_rad": _num,
                "reverse_velocity": {"type": "boolean"},
            },
            "required": ["type", "a_m", "ex", "ey", "hx", "hy", "M_rad"],
            "additionalProperties": False,
        },
        {
            "type": "object",
            "properties": {
                "type": {"const": "cartesian"},
                "r_m": _vec3, "v_mps": _vec3,
                "reverse_velocity": {"type": "boolean"},
            },
            "required": ["type", "r_m", "v_mps"],
            "additionalProperties": False,
        },
    ]
}

SCHEMA: dict = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "bodies": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    "dry_mass_kg": _pos,
                    "fuel_kg": _nonneg,
                    "radius_m": _pos,
                    "area_m2": _pos,
                    "cd": _nonneg,
                    "cr": _nonneg,
                    "isp_s": _pos,
                    "elements": _ELEMENTS,
                    "sigma": {"type": "array", "items": _nonneg, "minItems": 6, "maxItems": 6},
                    "thrust": {
                        "type": "object",
                        "properties": {
                            "t_max_n": _nonneg,
                            "theta_max_rad": {"type": "number", "minimum": 0, "maximum": TWO_PI},
                            "phi_max_rad": {"type": "number", "minimum": 0, "maximum": TWO_PI},
                            "decision_flag": {"type": "boolean"},
                        },
                        "required": ["t_max_n"],
                        "additionalProperties": False,
                    },
                    "agent_params": {"type": "object"},
                },
                "required": ["name", "dry_mass_kg", "radius_m", "elements"],
                "additionalProperties": False,
            },
        },
        "forces": {
            "type": "object",
            "properties": {
                "mu": _pos,
                "earth_radius_m": _pos,
                "enable_j2": {"type": "boolean"},
                "j2": _num,
                "enable_drag": {"type": "boolean"},
                "drag": {
                    "type": "object",
                    "properties": {"rho0": _nonneg, "h0_m": _num, "scale_height_m": _pos},
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
        "mission": {
            "type": "object",
            "properties": {"id": {"type": "string"}, "params": {"type": "object"}},
            "required": ["id"],
            "additionalProperties": False,
        },
        "stepping": {
            "type": "object",
            "properties": {
                "step_s": _pos,
                "episode_steps": {"type": "integer", "minimum": 1},
                "burn_window_s": _pos,
                "integrator_step_s": _pos,
                "parallel": {"type": "boolean"},
                "workers": {"type": "integer", "minimum": 1},
            },
            "required": ["step_s", "episode_steps"],
            "additionalProperties": False,
        },
        "seed": {"type": "integer"},
        "epoch": {"type": "string"},
    },
    "required": ["bodies", "stepping"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class ThrustSpec:
    t_max: float
    theta_max: float = np.pi
    phi_max: float = TWO_PI
    decision_flag: bool = False


@dataclass(frozen=True)
class BodySpec:
    name: str
    properties: BodyProperties
    mean_state: CartesianState
    sigma: np.ndarray
    thrust: Optional[ThrustSpec] = None
    agent_params: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SteppingSpec:
    step_s: float
    episode_steps: int
    burn_window_s: Optional[float] = None
    integrator_step_s: Optional[float] = None
    parallel: bool = False
    workers: int = 4

    @property
    def substep_s(self) -> float:
        return self.integrator_step_s if self.integrator_step_s else min(self.step_s, 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    bodies: tuple
    forces: ForceConfig
    stepping: SteppingSpec
    mission_id: str = "none"
    mission_params: Mapping[str, Any] = field(default_factory=dict)
    seed: int = 0
    epoch: Optional[str] = None
    document: Mapping[str, Any] = field(default_factory=dict, repr=False, compare=False)

    def body(self, name: str) -> BodySpec:
        for b in self.bodies:
            if b.name == name:
                return b
        raise KeyError(name)


def _path(err) -> str:
    parts = [str(p) for p in err.absolute_path]
    return "/".join(parts) if parts else "<root>"


def _describe(err) -> list[str]:
    # oneOf failures: report the branch matching the declared element type
    if err.validator == "oneOf" and isinstance(err.instance, dict) and err.context:
        kind = err.instance.get("type")
        picked = [e for e in err.context
                  if e.schema_path and len(e.schema_path) > 0 and
                  err.schema["oneOf"][e.schema_path[0]]["properties"]["type"].get("const") == kind]
        if kind is None:
            return [f"{_path(err)}: elements need a 'type' of keplerian, equinoctial or cartesian"]
        if not picked:
            return [f"{_path(err)}: unknown elements type {kind!r}"]
        return [f"{_path(e)}: {e.message}" for e in picked]
    return [f"{_path(err)}: {err.message}"]


def validate_document(doc: Mapping[str, Any]) -> list[str]:
    """Every schema and semantic violation in ``doc`` (empty list when valid)."""
    if not isinstance(doc, Mapping):
        return ["<root>: scenario document must be a JSON object"]
    problems: list[str] = []
    for err in sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path))):
        problems.extend(_describe(err))
    bodies = doc.get("bodies")
    if isinstance(bodies, list):
        seen = set()
        for i, b in enumerate(bodies):
            name = b.get("name") if isinstance(b, dict) else None
            if name in seen:
                problems.append(f"bodies/{i}/name: duplicate body name {name!r}")
            seen.add(name)
            if isinstance(b, dict):
                el = b.get("elements")
                if isinstance(el, dict) and el.get("type") == "equinoctial":
                    ex, ey = el.get("ex", 0), el.get("ey", 0)
                    if isinstance(ex, (int, float)) and isinstance(ey, (int, float)) and ex * ex + ey * ey >= 1:
                        problems.append(f"bodies/{i}/elements: ex^2 + ey^2 must be < 1")
    mission = doc.get("mission")
    if isinstance(mission, dict) and isinstance(mission.get("id"), str) and mission["id"] not in MISSION_IDS:
        problems.append(f"mission/id: unknown mission id {mission['id']!r}")
    return problems


def _mean_state(el: Mapping[str, Any], mu: float) -> CartesianState:
    kind = el["type"]
    if kind == "keplerian":
        k = KeplerianElements(el["a_m"], el["e"], el["i_rad"], el["omega_rad"], el["raan_rad"],
                              el["anomaly_rad"], el.get("anomaly_kind", "mean"))
        c = keplerian_to_cartesian(k, mu)
    elif kind == "equinoctial":
        c = equinoctial_to_cartesian(
            EquinoctialElements(el["a_m"], el["ex"], el["ey"], el["hx"], el["hy"], el["M_rad"]), mu)
    else:
        c = CartesianState(el["r_m"], el["v_mps"])
    if el.get("reverse_velocity"):
        c = CartesianState(c.position, -c.velocity, c.epoch)
    return c


def parse_document(doc: Mapping[str, Any]) -> ScenarioConfig:
    """Validate and convert a scenario document.

    Raises:
        ScenarioError: listing every violation found.
    """
    problems = validate_document(doc)
    if problems:
        raise ScenarioError(problems)
    f = doc.get("forces", {})
    drag = f.get("drag", {})
    forces = ForceConfig(
        mu=f.get("mu", MU_EARTH),
        earth_radius=f.get("earth_radius_m", R_EARTH),
        enable_j2=f.get("enable_j2", False),
        j2=f.get("j2", ForceConfig.j2),
        enable_drag=f.get("enable_drag", False),
        drag_rho0=drag.get("rho0", DRAG_RHO0),
        drag_h0=drag.get("h0_m", DRAG_H0),
        drag_scale_height=drag.get("scale_height_m", DRAG_SCALE_HEIGHT),
    )
    bodies = []
    errors = []
    for i, b in enumerate(doc["bodies"]):
        try:
            props = BodyProperties(
                dry_mass=b["dry_mass_kg"], fuel_mass=b.get("fuel_kg", 0.0), radius=b["radius_m"],
                drag_coefficient=b.get("cd", 2.2), reflection_coefficient=b.get("cr", 1.0),
                cross_section_area=b.get("area_m2"), isp=b.get("isp_s", 300.0))
            state = _mean_state(b["elements"], forces.mu)
        except ValueError as exc:
            errors.append(f"bodies/{i}: {exc}")
            continue
        t = b.get("thrust")
        thrust = None
        if t is not None:
            thrust = ThrustSpec(t["t_max_n"], t.get("theta_max_rad", np.pi), t.get("phi_max_rad", TWO_PI),
                                t.get("decision_flag", False))
        bodies.append(BodySpec(b["name"], props, state, np.asarray(b.get("sigma", [0.0] * 6), dtype=float),
                               thrust, dict(b.get("agent_params", {}))))
    s = doc["stepping"]
    burn = s.get("burn_window_s")
    if burn is not None and burn > s["step_s"]:
        errors.append("stepping/burn_window_s: burn window longer than the step")
    if errors:
        raise ScenarioError(errors)
    stepping = SteppingSpec(s["step_s"], s["episode_steps"], burn, s.get("integrator_step_s"),
                            s.get("parallel", False), s.get("workers", 4))
    mission = doc.get("mission", {"id": "none"})
    return ScenarioConfig(tuple(bodies), forces, stepping, mission["id"], dict(mission.get("params", {})),
                          int(doc.get("seed", 0)), doc.get("epoch"), document=doc)


def load_document(source) -> dict:
    """Read a scenario from a path, JSON text, or an already-parsed mapping."""
    if isinstance(source, Mapping):
        return dict(source)
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {source}: {exc}") from exc
    else:
        text = source
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
