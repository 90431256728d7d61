"""Per-base-station decision agents.

Arms are activation bitmasks over the non-Eco slices, so with ``S`` slices
there are ``2**S`` arms and arm ``2**S - 1`` keeps everything on.
"""

from __future__ import annotations

from collections import deque
from typing import Protocol, Union

import numpy as np

from .env import Observation
from .neural import AdamState, Mlp, forward, init_mlp, train_step

Context = Union[Observation, np.ndarray]


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A Thompson precision matrix lost positive definiteness."""


def _vec(ctx: Context) -> np.ndarray:
    if isinstance(ctx, Observation):
        return ctx.as_vector()
    return np.asarray(ctx, dtype=np.float64)


class Agent(Protocol):
    kind: str
    n_arms: int
    explore: bool

    def select(self, ctx: Context) -> int: ...

    def update(self, ctx: Context, arm: int, reward: float) -> None: ...

    def to_dict(self) -> dict: ...


class DcmabAgent:
    """Epsilon-greedy bandit over an MLP that predicts one reward per arm, trained from a replay buffer."""

    kind = "dcmab"

    def __init__(
        self,
        n_arms: int,
        context_dim: int,
        seed: int,
        hidden: tuple[int, ...] = (32, 32),
        lr: float = 3e-2,
        epsilon: float = 1.0,
        epsilon_decay: float = 0.95,
        epsilon_floor: float = 0.05,
        buffer_capacity: int = 10_000,
        warmup: int = 16,
        batch_size: int = 64,
    ) -> None:
        if not 0.0 <= epsilon_floor <= epsilon <= 1.0:
            raise ValueError("need 0 <= epsilon_floor <= epsilon <= 1")
        if not 0.0 < epsilon_decay <= 1.0:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if buffer_capacity < 1 or batch_size < 1 or warmup < 0:
            raise ValueError("buffer_capacity and batch_size must be >= 1, warmup >= 0")
        net_seed, rng_seed = np.random.SeedSequence(seed).spawn(2)
        self.n_arms = n_arms
        self.net = init_mlp((context_dim, *hidden, n_arms), int(net_seed.generate_state(1)[0]))
        self.adam = AdamState.for_net(self.net, lr=lr)
        self.rng = np.random.default_rng(rng_seed)
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.epsilon_floor = epsilon_floor
        self.buffer: deque[tuple[np.ndarray, int, float]] = deque(maxlen=buffer_capacity)
        self.warmup = warmup
        self.batch_size = batch_size
        self.explore = True

    def select(self, ctx: Context) -> int:
        x = _vec(ctx)
        if self.explore and self.rng.random() < self.epsilon:
            arm = int(self.rng.integers(self.n_arms))
        else:
            arm = int(np.argmax(forward(self.net, x)))
        if self.explore:
            self.epsilon = max(self.epsilon_floor, self.epsilon * self.epsilon_decay)
        return arm

    def update(self, ctx: Context, arm: int, reward: float) -> None:
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        self.buffer.append((_vec(ctx).copy(), int(arm), float(reward)))
        if len(self.buffer) < max(self.warmup, 1):
            return
        size = min(self.batch_size, len(self.buffer))
        idx = self.rng.choice(len(self.buffer), size=size, replace=False)
        train_step(self.net, self.adam, [self.buffer[i] for i in idx])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "epsilon": self.epsilon, "net": self.net.to_dict()}

    def load_dict(self, d: dict) -> None:
        self.net = Mlp.from_dict(d["net"])
        self.adam = AdamState.for_net(self.net, lr=self.adam.lr)
        self.epsilon = float(d["epsilon"])


class ThompsonAgent:
    """Linear Thompson sampling with an independent Gaussian posterior per arm.

    Arm ``a`` keeps a precision matrix ``B[a]`` (prior ``prior_scale * I``)
    and a response vector ``f[a]``; its posterior over weights has mean
    ``B[a]^-1 f[a]`` and covariance ``noise_scale**2 * B[a]^-1``. With
    ``intercept`` a constant 1 is prepended to every context, so ``B[a]`` is
    ``(context_dim + 1)``-square.
    """

    kind = "thompson"

    def __init__(
        self,
        n_arms: int,
        context_dim: int,
        seed: int,
        prior_scale: float = 0.01,
        noise_scale: float = 0.25,
        intercept: bool = False,
    ) -> None:
        if prior_scale <= 0:
            raise ValueError("prior_scale must be > 0")
        if noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        self.n_arms = n_arms
        self.intercept = intercept
        self.d = context_dim + int(intercept)
        self.prior_scale = prior_scale
        self.noise_scale = noise_scale
        self.B = np.tile(prior_scale * np.eye(self.d), (n_arms, 1, 1))
        self.f = np.zeros((n_arms, self.d))
        self.rng = np.random.default_rng(seed)
        self.explore = True

    def features(self, ctx: Context) -> np.ndarray:
        x = _vec(ctx)
        if self.intercept:
            x = np.concatenate(([1.0], x))
        if x.shape != (self.d,):
            raise ValueError(f"context gives features of shape {x.shape}, expected ({self.d},)")
        return x

    def _cholesky(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.B)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"precision matrix not positive definite: {exc}") from None

    def _means(self, L: np.ndarray) -> np.ndarray:
        y = np.linalg.solve(L, self.f[..., None])
        return np.linalg.solve(np.swapaxes(L, 1, 2), y)[..., 0]

    def posterior_means(self) -> np.ndarray:
        return self._means(self._cholesky())

    def select(self, ctx: Context) -> int:
        x = self.features(ctx)
        L = self._cholesky()
        mu = self._means(L)
        w = mu
        if self.explore and self.noise_scale > 0:
            z = self.rng.standard_normal((self.n_arms, self.d))
            # B = L L^T, so L^-T z has covariance B^-1
            w = mu + self.noise_scale * np.linalg.solve(np.swapaxes(L, 1, 2), z[..., None])[..., 0]
        return int(np.argmax(w @ x))

    def update(self, ctx: Context, arm: int, reward: float) -> None:
        if not np.isfinite(reward):
            raise ValueError("reward must be finite")
        x = self.features(ctx)
        self.B[arm] += np.outer(x, x)
        self.f[arm] += reward * x

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "prior_scale": self.prior_scale,
            "noise_scale": self.noise_scale,
            "intercept": self.intercept,
            "B": self.B.tolist(),
            "f": self.f.tolist(),
        }

    def load_dict(self, d: dict) -> None:
        self.B = np.array(d["B"], dtype=np.float64)
        self.f = np.array(d["f"], dtype=np.float64)


def baseline_select(kind: str, n_arms: int, rng: np.random.Generator | None = None) -> int:
    if n_arms < 1:
        raise ValueError("n_arms must be >= 1")
    if kind == "allactive":
        return n_arms - 1
    if kind == "random":
        if rng is None:
            raise ValueError("the random baseline needs a generator")
        return int(rng.integers(n_arms))
    raise ValueError(f"unknown baseline {kind!r}")


class AllActiveAgent:
    kind = "allactive"

    def __init__(self, n_arms: int, context_dim: int = 0, seed: int = 0) -> None:
        self.n_arms = n_arms
        self.explore = True

    def select(self, ctx: Context) -> int:
        return baseline_select(self.kind, self.n_arms)

    def update(self, ctx: Context, arm: int, reward: float) -> None:
        pass

    def to_dict(self) -> dict:
        return {"kind": self.kind}


class RandomAgent:
    kind = "random"

    def __init__(self, n_arms: int, context_dim: int = 0, seed: int = 0) -> None:
        self.n_arms = n_arms
        self.rng = np.random.default_rng(seed)
        self.explore = True

    def select(self, ctx: Context) -> int:
        return baseline_select(self.kind, self.n_arms, self.rng)

    def update(self, ctx: Context, arm: int, reward: float) -> None:
        pass

    def to_dict(self) -> dict:
        return {"kind": self.kind}


AGENT_KINDS = {cls.kind: cls for cls in (DcmabAgent, ThompsonAgent, AllActiveAgent, RandomAgent)}


def make_agent(kind: str, n_arms: int, context_dim: int, seed: int, **params) -> Agent:
    try:
        cls = AGENT_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown agent kind {kind!r}; choose from {sorted(AGENT_KINDS)}") from None
    return cls(n_arms, context_dim, seed, **params)
