"""Step-time scaling benchmark over the number of propagated bodies."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arena import Arena
from .constants import R_EARTH
from .scenario import load_document, parse_document

TIER_FLAGS = {
    "newtonian": {"enable_j2": False, "enable_drag": False},
    "newtonian+drag": {"enable_j2": False, "enable_drag": True},
    "full": {"enable_j2": True, "enable_drag": True},
}


def swarm_document(n: int, tier: str = "full", seed: int = 0, step_s: float = 60.0, steps: int = 10,
                   workers: int = 4) -> dict:
    """``n`` uncontrolled bodies on random low orbits."""
    if n < 1:
        raise ValueError("body count must be at least 1")
    if tier not in TIER_FLAGS:
        raise ValueError(f"unknown force tier {tier!r}; expected one of {sorted(TIER_FLAGS)}")
    rng = np.random.default_rng(seed)
    bodies = []
    for k in range(n):
        bodies.append({
            "name": f"body_{k}", "dry_mass_kg": float(rng.uniform(50, 500)), "radius_m": float(rng.uniform(0.5, 3)),
            "elements": {"type": "keplerian", "a_m": R_EARTH + float(rng.uniform(450e3, 1200e3)),
                         "e": float(rng.uniform(0, 0.02)), "i_rad": float(rng.uniform(0, math.pi * 0.9)),
                         "omega_rad": float(rng.uniform(0, 2 * math.pi)),
                         "raan_rad": float(rng.uniform(0, 2 * math.pi)),
                         "anomaly_rad": float(rng.uniform(0, 2 * math.pi))},
        })
    return {"bodies": bodies, "forces": dict(TIER_FLAGS[tier]), "seed": seed,
            "stepping": {"step_s": step_s, "episode_steps": steps, "workers": workers}}


@dataclass(frozen=True)
class BenchRow:
    bodies: int
    mode: str
    mean_s: float
    std_s: float
    steps: int


def time_steps(arena: Arena, steps: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-step wall times and the final positions."""
    arena.reset(seed)
    times = np.zeros(steps)
    for k in range(steps):
        t0 = time.perf_counter()
        arena.step({})
        times[k] = time.perf_counter() - t0
    return times, arena.positions()


def run_bench(counts: Sequence[int], tier: str = "full", steps: int = 10, seed: int = 0, workers: int = 4,
              step_s: float = 60.0) -> tuple[list, dict]:
    """Rows for sequential and parallel stepping, plus the largest final-position gap per count."""
    rows, gaps = [], {}
    for n in counts:
        config = parse_document(load_document(swarm_document(int(n), tier, seed, step_s, steps, workers)))
        finals = {}
        for mode, parallel in (("sequential", False), ("parallel", True)):
            arena = Arena(config, parallel=parallel)
            try:
                times, finals[mode] = time_steps(arena, steps, seed)
            finally:
                arena.close()
            rows.append(BenchRow(int(n), mode, float(times.mean()), float(times.std()), steps))
        gaps[int(n)] = float(np.max(np.linalg.norm(finals["sequential"] - finals["parallel"], axis=1)))
    return rows, gaps


def scaling_ratio(rows: Sequence[BenchRow], small: int, large: int, mode: str = "sequential") -> float:
    t = {r.bodies: r.mean_s for r in rows if r.mode == mode}
    return t[large] / t[small]


__all__ = ["BenchRow", "run_bench", "scaling_ratio", "swarm_document", "time_steps"]
