"""JSON checkpoints: layer shapes, row-major weights and normalizer statistics.

Floats are written with Python's shortest round-trip representation, so a
save/load cycle reproduces every parameter bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .ddpg import DdpgAgent, DdpgConfig
from .ddqn import DdqnAgent, DdqnConfig
from .mlp import Mlp, Normalizer
from .ppo import PpoAgent, PpoConfig

FORMAT = "orbitarena-checkpoint"
VERSION = 1


def _encode(obj: Any) -> Any:
    if isinstance(obj, Mlp):
        return {"__mlp__": {
            "sizes": obj.sizes, "output_activation": obj.output_activation,
            "params": [_encode(p) for p in obj.params],
            "normalizer": None if obj.normalizer is None else _encode(obj.normalizer.state()),
        }}
    if isinstance(obj, np.ndarray):
        return {"__array__": {"shape": list(obj.shape), "data": [float(x) for x in obj.ravel()]}}
    if isinstance(obj, dict):
        return {str(k): _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _decode(obj: Any) -> Any:
    if isinstance(obj, dict):
        if "__array__" in obj:
            a = obj["__array__"]
            return np.array(a["data"], dtype=float).reshape(a["shape"])
        if "__mlp__" in obj:
            m = obj["__mlp__"]
            net = Mlp(m["sizes"], m["output_activation"], normalize=m["normalizer"] is not None)
            net.set_params([_decode(p) for p in m["params"]])
            if m["normalizer"] is not None:
                net.normalizer = Normalizer(m["sizes"][0])
                net.normalizer.load(_decode(m["normalizer"]))
            return net
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def encode_state(obj: Any) -> Any:
    """JSON-ready form of nested arrays, networks and containers."""
    return _encode(obj)


def decode_state(obj: Any) -> Any:
    return _decode(obj)


def dumps(agent, extra: Optional[dict] = None) -> str:
    doc = {"format": FORMAT, "version": VERSION, "algo": agent.kind, "obs_dim": agent.obs_dim,
           "state": _encode(agent.state()), "extra": _encode(extra or {})}
    if agent.kind == "ddqn":
        doc["n_actions"] = agent.n_actions
    return json.dumps(doc, sort_keys=True)


def loads(text: str):
    """Agent rebuilt from checkpoint text, and the ``extra`` payload."""
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError("not an orbitarena checkpoint")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    st = _decode(doc["state"])
    algo = doc["algo"]
    if algo == "ppo":
        agent = PpoAgent(doc["obs_dim"], st["low"], st["high"], PpoConfig.from_dict(st["config"]))
    elif algo == "ddpg":
        agent = DdpgAgent(doc["obs_dim"], st["low"], st["high"], DdpgConfig.from_dict(st["config"]))
    elif algo == "ddqn":
        agent = DdqnAgent(doc["obs_dim"], doc["n_actions"], DdqnConfig.from_dict(st["config"]))
    else:
        raise ValueError(f"unknown algorithm {algo!r}")
    agent.load(st)
    return agent, _decode(doc.get("extra", {}))


def save_checkpoint(path: Union[str, Path], agent, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(agent, extra))
    return path


def load_checkpoint(path: Union[str, Path]):
    return loads(Path(path).read_text())
