"""The recursion ``theta_{t+1} = theta_t - lam H(theta_t, Y_t) + sqrt(lam) xi_{t+1}``.

Single chains and ensembles share one engine. Chain ``i`` of an ensemble with
master seed ``s`` owns two Philox generators seeded from
``SeedSequence(s, spawn_key=(i, 0))`` (data stream) and ``(i, 1)`` (noise),
so the stream never consumes noise randomness and every chain's path is the
same no matter how many chains run beside it or how many threads draw them.
The arithmetic is vectorised across chains.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .models import UpdateModel
from .noise import NoiseModel
from .streams import StationaryStream

__all__ = [
    "ConfigurationError", "DivergenceError", "DIVERGENCE_RADIUS", "ChainConfig",
    "Trajectory", "EnsembleResult", "step", "run_chain", "run_ensemble", "chain_generators",
]

DIVERGENCE_RADIUS = 1e10
_BLOCK_ELEMS = 1 << 22
_STREAM, _NOISE = 0, 1


class ConfigurationError(ValueError):
    """Inconsistent dimensions or invalid chain settings."""


class DivergenceError(ArithmeticError):
    """The update produced a non-finite value; ``theta`` is the offending state."""

    def __init__(self, theta, message="non-finite update"):
        super().__init__(f"{message} at theta={np.asarray(theta).tolist()}")
        self.theta = np.asarray(theta)


@dataclass(frozen=True, eq=False)
class ChainConfig:
    """Step size, horizon, start, master seed and checkpoint times.

    ``checkpoints`` defaults to ``(0, horizon)``.
    """

    lam: float
    horizon: int
    theta0: np.ndarray
    seed: int = 0
    checkpoints: tuple | None = None

    def __post_init__(self):
        if not (0 < self.lam <= 1):
            raise ConfigurationError(f"step size must satisfy 0 < lam <= 1, got {self.lam}")
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ConfigurationError(f"horizon must be a non-negative integer, got {self.horizon}")
        object.__setattr__(self, "horizon", int(self.horizon))
        theta0 = np.atleast_1d(np.asarray(self.theta0, dtype=float))
        if theta0.ndim != 1 or theta0.size < 1:
            raise ConfigurationError("theta0 must be a non-empty vector")
        if not np.all(np.isfinite(theta0)):
            raise ConfigurationError("theta0 must be finite")
        object.__setattr__(self, "theta0", theta0)
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "seed", int(self.seed))
        cps = (0, self.horizon) if self.checkpoints is None else tuple(int(c) for c in self.checkpoints)
        if self.checkpoints is None and self.horizon == 0:
            cps = (0,)
        if not cps:
            raise ConfigurationError("at least one checkpoint is required")
        if any(b <= a for a, b in zip(cps, cps[1:])):
            raise ConfigurationError("checkpoints must be strictly increasing")
        if cps[0] < 0 or cps[-1] > self.horizon:
            raise ConfigurationError(f"checkpoints must lie in [0, {self.horizon}]")
        object.__setattr__(self, "checkpoints", cps)

    @property
    def d(self) -> int:
        return self.theta0.size


@dataclass
class Trajectory:
    """Checkpointed states of one chain; stops at the first diverged checkpoint."""

    times: np.ndarray
    states: np.ndarray
    diverged_at: int | None = None


@dataclass
class EnsembleResult:
    """``snapshots[k]`` is the ``(n_chains, d)`` matrix at ``times[k]``.

    Rows of chains that diverged at or before ``times[k]`` are NaN;
    ``diverged_at[i]`` is ``-1`` for chains that never diverged.
    """

    times: np.ndarray
    snapshots: np.ndarray
    diverged_at: np.ndarray
    seed: int
    extra: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.snapshots.shape[1]

    @property
    def n_diverged(self) -> int:
        return int((self.diverged_at >= 0).sum())

    def at(self, t: int) -> np.ndarray:
        k = int(np.searchsorted(self.times, t))
        if k >= len(self.times) or self.times[k] != t:
            raise KeyError(f"{t} is not a checkpoint")
        return self.snapshots[k]

    def trajectory(self, i: int) -> Trajectory:
        div = int(self.diverged_at[i])
        keep = self.times < div if div >= 0 else np.ones(len(self.times), bool)
        return Trajectory(self.times[keep], self.snapshots[keep, i], div if div >= 0 else None)


def _check_dims(model: UpdateModel, stream: StationaryStream, noise: NoiseModel, d: int):
    if model.d != d or noise.d != d:
        raise ConfigurationError(
            f"dimension mismatch: theta0 has d={d}, model d={model.d}, noise d={noise.d}")
    if model.m != stream.m:
        raise ConfigurationError(f"dimension mismatch: model m={model.m}, stream m={stream.m}")


def step(theta, y, xi, lam: float, model: UpdateModel) -> np.ndarray:
    """One update ``theta - lam H(theta, y) + sqrt(lam) xi``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if theta.shape != (model.d,) or xi.shape != (model.d,):
        raise ConfigurationError(f"theta and xi must have shape ({model.d},)")
    if y.shape != (model.m,):
        raise ConfigurationError(f"y must have shape ({model.m},)")
    with np.errstate(over="ignore", invalid="ignore"):
        h = model.H(theta, y)
    if not np.all(np.isfinite(h)):
        raise DivergenceError(theta)
    return theta - lam * h + math.sqrt(lam) * xi


def chain_generators(seed: int, i: int) -> tuple[np.random.Generator, np.random.Generator]:
    """``(stream_rng, noise_rng)`` for chain ``i`` under master ``seed``."""
    mk = lambda k: np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(i, k))))
    return mk(_STREAM), mk(_NOISE)


def _fill(pool, fn, n):
    if pool is None:
        for i in range(n):
            fn(i)
    else:
        list(pool.map(fn, range(n)))


def run_ensemble(model: UpdateModel, stream: StationaryStream, noise: NoiseModel,
                 cfg: ChainConfig, n_chains: int, threads: int = 1) -> EnsembleResult:
    """Run ``n_chains`` independent chains and keep checkpoint snapshots.

    ``threads`` only parallelises random number generation; the result is
    identical for every thread count.
    """
    if int(n_chains) != n_chains or n_chains < 1:
        raise ConfigurationError("n_chains must be a positive integer")
    d = cfg.d
    _check_dims(model, stream, noise, d)
    n, T, lam = int(n_chains), cfg.horizon, cfg.lam
    sq = math.sqrt(lam)
    gens = [chain_generators(cfg.seed, i) for i in range(n)]
    pool = ThreadPoolExecutor(threads) if threads and threads > 1 else None

    times = np.asarray(cfg.checkpoints, dtype=np.int64)
    snaps = np.full((len(times), n, d), np.nan)
    diverged_at = np.full(n, -1, dtype=np.int64)
    alive = np.ones(n, dtype=bool)

    z0 = np.empty((n, stream.init_dim))

    def draw_init(i):
        z0[i] = gens[i][_STREAM].standard_normal(stream.init_dim)

    _fill(pool, draw_init, n)
    state = stream._init(z0)
    theta = np.tile(cfg.theta0, (n, 1))

    k = 0
    if times[0] == 0:
        snaps[0] = theta
        k = 1
    per_step = max(1, n * (d + stream.innov_dim))
    t = 0
    try:
        while t < T and k < len(times) and alive.any():
            B = int(min(T - t, times[-1] - t, max(1, _BLOCK_ELEMS // per_step)))
            e = np.empty((n, B, stream.innov_dim))
            xi = np.empty((n, B, d))

            def draw_block(i):
                e[i] = gens[i][_STREAM].standard_normal((B, stream.innov_dim))
                xi[i] = noise.sample(gens[i][_NOISE], B)

            _fill(pool, draw_block, n)
            for s in range(B):
                y, state = stream._emit(state, e[:, s])
                with np.errstate(over="ignore", invalid="ignore"):
                    if alive.all():
                        theta = theta - lam * model.func(theta, y) + sq * xi[:, s]
                        bad = ~(np.einsum("ij,ij->i", theta, theta) <= DIVERGENCE_RADIUS ** 2)
                    else:
                        idx = np.flatnonzero(alive)
                        th = theta[idx] - lam * model.func(theta[idx], y[idx]) + sq * xi[idx, s]
                        theta[idx] = th
                        bad = np.zeros(n, dtype=bool)
                        bad[idx] = ~(np.einsum("ij,ij->i", th, th) <= DIVERGENCE_RADIUS ** 2)
                t += 1
                if bad.any():
                    diverged_at[bad] = t
                    alive &= ~bad
                if k < len(times) and times[k] == t:
                    snaps[k] = np.where(alive[:, None], theta, np.nan)
                    k += 1
                if not alive.any():
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    return EnsembleResult(times, snaps, diverged_at, cfg.seed)


def run_chain(model: UpdateModel, stream: StationaryStream, noise: NoiseModel,
              cfg: ChainConfig) -> Trajectory:
    """Run a single chain (chain index 0 under ``cfg.seed``)."""
    return run_ensemble(model, stream, noise, cfg, 1).trajectory(0)
