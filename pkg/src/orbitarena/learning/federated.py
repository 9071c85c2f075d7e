"""Buffer-size-weighted parameter averaging across agents."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .mlp import Mlp


def fedavg(params_list: Sequence[Sequence[np.ndarray]], buffer_sizes: Sequence[float]) -> list:
    """w = Σ_i (|B_i| / Σ_k |B_k|) w_i, layer by layer.

    Evaluated as w_0 + Σ_i c_i (w_i − w_0) and clamped to the elementwise
    range of the inputs, so identical inputs are returned unchanged and the
    result never leaves their convex hull through rounding.
    """
    if len(params_list) == 0:
        raise ValueError("need at least one parameter set")
    if len(buffer_sizes) != len(params_list):
        raise ValueError("one buffer size per parameter set is required")
    sizes = np.asarray(buffer_sizes, dtype=float)
    if np.any(sizes <= 0):
        raise ValueError("buffer sizes must be positive")
    coef = sizes / sizes.sum()
    n_layers = len(params_list[0])
    for p in params_list:
        if len(p) != n_layers or any(np.shape(a) != np.shape(b) for a, b in zip(p, params_list[0])):
            raise ValueError("parameter sets must have identical shapes")
    out = []
    for k in range(n_layers):
        stack = np.stack([np.asarray(p[k], dtype=float) for p in params_list])
        base = stack[0]
        avg = base + np.tensordot(coef, stack - base, axes=1)
        out.append(np.clip(avg, stack.min(axis=0), stack.max(axis=0)))
    return out


def fedavg_networks(networks: Sequence[Mlp], buffer_sizes: Sequence[float]) -> None:
    """Replace every network's parameters with their weighted average."""
    avg = fedavg([n.params for n in networks], buffer_sizes)
    for n in networks:
        n.set_params(avg)
