"""Feed-forward Tanh networks with analytic gradients, input normalization and Adam."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NORM_EPS = 1e-8


class Normalizer:
    """Running per-feature mean and standard deviation.

    Statistics only change through :meth:`update`, so they stay frozen while
    gradients are computed.
    """

    def __init__(self, dim: int, clip: float = 10.0):
        self.dim = int(dim)
        self.count = 0
        self.mean = np.zeros(self.dim)
        self.m2 = np.zeros(self.dim)
        self.clip = float(clip)

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones(self.dim)
        return np.maximum(np.sqrt(self.m2 / self.count), NORM_EPS)

    def update(self, x) -> None:
        """Chan's parallel update with a batch of rows."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x = x[np.all(np.isfinite(x), axis=1)]
        if len(x) == 0:
            return
        n_b = len(x)
        mean_b = x.mean(axis=0)
        m2_b = ((x - mean_b) ** 2).sum(axis=0)
        n = self.count + n_b
        delta = mean_b - self.mean
        self.mean = self.mean + delta * n_b / n
        self.m2 = self.m2 + m2_b + delta**2 * self.count * n_b / n
        self.count = n

    def __call__(self, x) -> np.ndarray:
        z = (np.asarray(x, dtype=float) - self.mean) / self.std
        return np.clip(np.nan_to_num(z), -self.clip, self.clip)

    def state(self) -> dict:
        return {"count": self.count, "mean": self.mean.copy(), "m2": self.m2.copy(), "clip": self.clip}

    def load(self, st: dict) -> None:
        self.count = int(st["count"])
        self.mean = np.array(st["mean"], dtype=float)
        self.m2 = np.array(st["m2"], dtype=float)
        self.clip = float(st["clip"])


@dataclass
class ForwardCache:
    inputs: np.ndarray
    activations: list = field(default_factory=list)  # input to each layer
    outputs: Optional[np.ndarray] = None


class Mlp:
    """Dense network: Tanh hidden layers, Tanh or linear output.

    Parameters live in ``weights`` (shape ``(n_in, n_out)``) and ``biases``.
    """

    def __init__(self, sizes: Sequence[int], output_activation: str = "linear",
                 rng: Optional[np.random.Generator] = None, output_scale: float = 0.1,
                 normalize: bool = True):
        sizes = [int(s) for s in sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError("need at least input and output sizes, all positive")
        if output_activation not in ("linear", "tanh"):
            raise ValueError("output_activation must be 'linear' or 'tanh'")
        self.sizes = sizes
        self.output_activation = output_activation
        self.normalizer = Normalizer(sizes[0]) if normalize else None
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weights, self.biases = [], []
        for k, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            limit = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-limit, limit, size=(n_in, n_out))
            if k == len(sizes) - 2:
                w *= output_scale
            self.weights.append(w)
            self.biases.append(np.zeros(n_out))

    # --- parameter plumbing --------------------------------------------------
    @property
    def params(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def set_params(self, params: Sequence[np.ndarray]) -> None:
        params = list(params)
        if len(params) != 2 * len(self.weights):
            raise ValueError("parameter count mismatch")
        for k in range(len(self.weights)):
            w, b = np.asarray(params[2 * k], dtype=float), np.asarray(params[2 * k + 1], dtype=float)
            if w.shape != self.weights[k].shape or b.shape != self.biases[k].shape:
                raise ValueError(f"layer {k}: shape mismatch")
            self.weights[k], self.biases[k] = w.copy(), b.copy()

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.sizes = list(self.sizes)
        other.output_activation = self.output_activation
        other.normalizer = None
        if self.normalizer is not None:
            other.normalizer = Normalizer(self.sizes[0])
            other.normalizer.load(self.normalizer.state())
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    def assign(self, other: "Mlp") -> None:
        """Copy parameters and normalizer statistics from a same-shaped network."""
        if other.sizes != self.sizes or other.output_activation != self.output_activation:
            raise ValueError(f"network shape {other.sizes} does not match {self.sizes}")
        self.set_params(other.params)
        if self.normalizer is not None and other.normalizer is not None:
            self.normalizer.load(other.normalizer.state())

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params])

    def set_flat(self, vec) -> None:
        vec = np.asarray(vec, dtype=float)
        out, pos = [], 0
        for p in self.params:
            out.append(vec[pos:pos + p.size].reshape(p.shape))
            pos += p.size
        if pos != vec.size:
            raise ValueError("flat parameter vector has the wrong length")
        self.set_params(out)

    # --- evaluation ----------------------------------------------------------
    def forward(self, x, cache: bool = False):
        """Network output for a row or a batch; with ``cache`` also the activations."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        xb = np.atleast_2d(x)
        if xb.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input arity {self.sizes[0]}, got {xb.shape[1]}")
        h = self.normalizer(xb) if self.normalizer is not None else xb
        acts = []
        last = len(self.weights) - 1
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            acts.append(h)
            z = h @ w + b
            h = np.tanh(z) if (k < last or self.output_activation == "tanh") else z
        out = h[0] if single else h
        if cache:
            return out, ForwardCache(xb, acts, h)
        return out

    __call__ = forward

    def backward(self, cache: ForwardCache, grad_output) -> tuple[list, np.ndarray]:
        """Parameter gradients and the gradient with respect to the raw input.

        ``grad_output`` is dL/d(output) with the batch layout of the forward call.
        """
        g = np.atleast_2d(np.asarray(grad_output, dtype=float))
        last = len(self.weights) - 1
        grads = [None] * (2 * len(self.weights))
        h = cache.outputs
        for k in range(last, -1, -1):
            if k < last or self.output_activation == "tanh":
                g = g * (1.0 - h**2)
            a = cache.activations[k]
            grads[2 * k] = a.T @ g
            grads[2 * k + 1] = g.sum(axis=0)
            g = g @ self.weights[k].T
            h = a
        if self.normalizer is not None:
            nz = self.normalizer
            z = (cache.inputs - nz.mean) / nz.std
            g = g / nz.std * (np.abs(z) < nz.clip)
        return grads, g


def mlp_forward(p: Mlp, x, cache: bool = True):
    return p.forward(x, cache=cache)


def mlp_backward(p: Mlp, cached: ForwardCache, output_gradient) -> list:
    return p.backward(cached, output_gradient)[0]


class Adam:
    """Adam over a list of arrays, updated in place."""

    def __init__(self, params: Sequence[np.ndarray], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8,
                 max_grad_norm: Optional[float] = None):
        self.lr, self.b1, self.b2, self.eps = float(lr), float(betas[0]), float(betas[1]), float(eps)
        self.max_grad_norm = max_grad_norm
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if self.max_grad_norm is not None:
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
            if norm > self.max_grad_norm:
                grads = [g * (self.max_grad_norm / norm) for g in grads]
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> dict:
        return {"lr": self.lr, "t": self.t, "m": [x.copy() for x in self.m], "v": [x.copy() for x in self.v]}

    def load(self, st: dict) -> None:
        self.lr, self.t = float(st["lr"]), int(st["t"])
        self.m = [np.array(x, dtype=float) for x in st["m"]]
        self.v = [np.array(x, dtype=float) for x in st["v"]]


def soft_update(target: Mlp, source: Mlp, tau: float) -> None:
    """θ⁻ ← τθ + (1−τ)θ⁻; normalizer statistics are copied."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for tp, sp in zip(target.params, source.params):
        if tau == 1.0:
            tp[...] = sp
        else:
            tp += tau * (sp - tp)
    if source.normalizer is not None and target.normalizer is not None:
        target.normalizer.load(source.normalizer.state())
