"""Small dense ReLU network trained with Adam, in plain numpy (float64)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class Mlp:
    """Weights ``W[l]`` have shape ``(dims[l+1], dims[l])``; hidden layers use ReLU, the output is linear."""

    dims: tuple[int, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def copy(self) -> Mlp:
        return Mlp(self.dims, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "weights": [w.ravel().tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d: dict) -> Mlp:
        dims = tuple(int(x) for x in d["dims"])
        weights = [
            np.array(w, dtype=np.float64).reshape(dims[i + 1], dims[i]) for i, w in enumerate(d["weights"])
        ]
        biases = [np.array(b, dtype=np.float64) for b in d["biases"]]
        return cls(dims, weights, biases)


def init_mlp(dims: Sequence[int], seed: int) -> Mlp:
    """Glorot-uniform weights, zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or any(d < 1 for d in dims):
        raise ValueError(f"need at least input and output dims, all >= 1; got {dims}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(dims, weights, biases)


def _forward_cache(net: Mlp, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray], list[np.ndarray]]:
    acts = [x]
    pre = []
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        pre.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        acts.append(h)
    return h, acts, pre


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Accepts one input vector or a batch ``(n, d_in)``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != net.dims[0]:
        raise ValueError(f"input has dimension {x.shape[-1]}, network expects {net.dims[0]}")
    return _forward_cache(net, x)[0]


def _stack_batch(net: Mlp, batch) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if len(batch) == 0:
        raise ValueError("empty batch")
    xs = np.array([np.asarray(b[0], dtype=np.float64) for b in batch])
    arms = np.array([int(b[1]) for b in batch])
    targets = np.array([float(b[2]) for b in batch])
    if not np.all(np.isfinite(targets)):
        raise ValueError("non-finite target in batch")
    if np.any(arms < 0) or np.any(arms >= net.dims[-1]):
        raise ValueError("arm index outside the output layer")
    if xs.ndim != 2 or xs.shape[1] != net.dims[0]:
        raise ValueError("batch inputs do not match the network input dimension")
    return xs, arms, targets


def loss_and_grads(net: Mlp, batch) -> tuple[float, list[np.ndarray]]:
    """Mean squared error on each item's chosen arm; grads ordered like ``net.params``."""
    xs, arms, targets = _stack_batch(net, batch)
    n = len(targets)
    out, acts, pre = _forward_cache(net, xs)
    rows = np.arange(n)
    err = out[rows, arms] - targets
    loss = float(np.mean(err**2))

    delta = np.zeros_like(out)
    delta[rows, arms] = 2.0 * err / n
    grads: list[np.ndarray] = []
    for i in range(len(net.weights) - 1, -1, -1):
        gw = delta.T @ acts[i]
        gb = delta.sum(axis=0)
        grads = [gw, gb] + grads
        if i > 0:
            delta = (delta @ net.weights[i]) * (pre[i - 1] > 0)
    return loss, grads


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_net(cls, net: Mlp, **hyper) -> AdamState:
        return cls(
            m=[np.zeros_like(p) for p in net.params],
            v=[np.zeros_like(p) for p in net.params],
            **hyper,
        )


def adam_update(net: Mlp, adam: AdamState, grads: list[np.ndarray]) -> None:
    if not adam.m:
        adam.m = [np.zeros_like(p) for p in net.params]
        adam.v = [np.zeros_like(p) for p in net.params]
    adam.step += 1
    c1 = 1.0 - adam.beta1**adam.step
    c2 = 1.0 - adam.beta2**adam.step
    for p, g, m, v in zip(net.params, grads, adam.m, adam.v):
        m *= adam.beta1
        m += (1.0 - adam.beta1) * g
        v *= adam.beta2
        v += (1.0 - adam.beta2) * g * g
        p -= adam.lr * (m / c1) / (np.sqrt(v / c2) + adam.eps)


def train_step(net: Mlp, adam: AdamState, batch) -> float:
    """One Adam step on the batch; returns the loss measured before the update."""
    loss, grads = loss_and_grads(net, batch)
    adam_update(net, adam, grads)
    return loss
