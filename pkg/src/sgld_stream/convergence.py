"""Empirical total-variation convergence of the chain law.

Binned TV between two empirical laws is biased upwards by sampling noise, so
every decay series also carries the TV between two independent ensembles with
the *same* start (the noise floor).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .chain import ChainConfig, EnsembleResult, run_ensemble
from .models import UpdateModel
from .noise import NoiseModel
from .streams import StationaryStream

__all__ = [
    "TVEstimate", "histogram_tv", "projected_tv", "DecayPoint", "DecayReport",
    "two_start_decay", "linear_chain_oracle", "Moments", "ensemble_moments", "derive_seed",
]

DEFAULT_BINS = 50
RANGE_SIGMAS = 6.0


@dataclass(frozen=True)
class TVEstimate:
    edges: np.ndarray
    countsA: np.ndarray
    countsB: np.ndarray
    value: float
    n_samples: tuple
    std_error: float
    direction: tuple | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "std_error": self.std_error, "n_samples": list(self.n_samples),
                "range": [float(self.edges[0]), float(self.edges[-1])],
                "bins": len(self.edges) - 1}


def _as_1d(samples, direction):
    x = np.asarray(samples, dtype=float)
    if x.ndim == 2:
        if x.shape[1] == 1 and direction is None:
            return x[:, 0]
        if direction is None:
            raise ValueError("multivariate samples need a projection direction")
        u = np.asarray(direction, dtype=float)
        return x @ (u / np.linalg.norm(u))
    if direction is not None and x.ndim == 1 and np.size(direction) != 1:
        raise ValueError("direction dimension does not match the samples")
    return x.ravel()


def histogram_tv(samplesA, samplesB, bins: int = DEFAULT_BINS, range: tuple | None = None,
                 direction=None) -> TVEstimate:
    """Binned TV ``1/2 sum_i |p_i - q_i|`` with shared edges.

    The default range is the pooled mean plus/minus six pooled standard
    deviations. Points outside the range fall into an underflow and an
    overflow bin, both of which enter the sum.
    """
    a = _as_1d(samplesA, direction)
    b = _as_1d(samplesB, direction)
    a, b = a[np.isfinite(a)], b[np.isfinite(b)]
    if a.size == 0 or b.size == 0:
        raise ValueError("both sample sets must contain finite values")
    if range is None:
        pooled = np.concatenate([a, b])
        mu, sd = pooled.mean(), pooled.std()
        half = RANGE_SIGMAS * sd if sd > 0 else 1.0
        range = (mu - half, mu + half)
    edges = np.linspace(range[0], range[1], bins + 1)

    def counts(x):
        inner, _ = np.histogram(x, edges)
        return np.concatenate([[np.sum(x < edges[0])], inner, [np.sum(x > edges[-1])]])

    ca, cb = counts(a), counts(b)
    p, q = ca / a.size, cb / b.size
    value = float(min(1.0, 0.5 * np.abs(p - q).sum()))
    # crude delta-method scale of the estimator's sampling noise
    se = 0.5 * math.sqrt(float((p * (1 - p)).sum() / a.size + (q * (1 - q)).sum() / b.size))
    direction = None if direction is None else tuple(np.ravel(direction).tolist())
    return TVEstimate(edges, ca, cb, value, (int(a.size), int(b.size)), se, direction)


def projected_tv(samplesA, samplesB, rng_seed: int = 0, bins: int = DEFAULT_BINS) -> TVEstimate:
    """TV of 1-D projections: first coordinate and one seeded random direction; the max is returned.

    Projection TV is a lower bound for the TV of the full laws.
    """
    A = np.atleast_2d(np.asarray(samplesA, dtype=float))
    B = np.atleast_2d(np.asarray(samplesB, dtype=float))
    if A.shape[1] == 1:
        return histogram_tv(A, B, bins)
    d = A.shape[1]
    u = np.random.default_rng(rng_seed).standard_normal(d)
    e1 = np.zeros(d)
    e1[0] = 1.0
    return max((histogram_tv(A, B, bins, direction=v) for v in (e1, u)), key=lambda t: t.value)


def derive_seed(seed: int, *key: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` for the given key path."""
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class DecayPoint:
    t: int
    tv: TVEstimate
    floor: TVEstimate | None

    def to_dict(self) -> dict:
        return {"t": self.t, "tv": self.tv.value, "tv_se": self.tv.std_error,
                "floor": None if self.floor is None else self.floor.value}


@dataclass
class DecayReport:
    points: list
    diverged: dict
    seeds: dict = field(default_factory=dict)

    @property
    def times(self) -> list:
        return [p.t for p in self.points]

    @property
    def tv(self) -> np.ndarray:
        return np.array([p.tv.value for p in self.points])

    @property
    def floor(self) -> np.ndarray:
        return np.array([np.nan if p.floor is None else p.floor.value for p in self.points])


def two_start_decay(model: UpdateModel, stream: StationaryStream, noise: NoiseModel, lam: float,
                    theta0_A, theta0_B, checkpoints, n_chains: int, seed: int,
                    bins: int = DEFAULT_BINS, noise_floor: bool = True,
                    threads: int = 1) -> DecayReport:
    """TV between the laws of two independent ensembles started at ``theta0_A`` and ``theta0_B``.

    A third ensemble from ``theta0_A`` supplies the same-law noise floor.
    Diverged chains are dropped from the estimates and counted in
    ``report.diverged``. A checkpoint where one side has no surviving chain
    gets TV 1 (the law has escaped to infinity).
    """
    cps = tuple(checkpoints)
    T = cps[-1]
    seeds = {"A": derive_seed(seed, 0), "B": derive_seed(seed, 1), "floor": derive_seed(seed, 2)}
    starts = {"A": theta0_A, "B": theta0_B, "floor": theta0_A}
    runs: dict[str, EnsembleResult] = {}
    for name in ("A", "B", "floor") if noise_floor else ("A", "B"):
        cfg = ChainConfig(lam, T, np.atleast_1d(starts[name]), seeds[name], cps)
        runs[name] = run_ensemble(model, stream, noise, cfg, n_chains, threads)
    points = []
    for k, t in enumerate(runs["A"].times):
        A = runs["A"].snapshots[k]
        B = runs["B"].snapshots[k]
        A, B = A[np.all(np.isfinite(A), axis=1)], B[np.all(np.isfinite(B), axis=1)]
        tv = _tv_or_escape(A, B, bins, seed)
        floor = None
        if noise_floor:
            C = runs["floor"].snapshots[k]
            C = C[np.all(np.isfinite(C), axis=1)]
            floor = _tv_or_escape(A, C, bins, seed)
        points.append(DecayPoint(int(t), tv, floor))
    diverged = {name: r.n_diverged for name, r in runs.items()}
    return DecayReport(points, diverged, seeds)


def _tv_or_escape(A, B, bins, seed):
    if len(A) and len(B):
        return projected_tv(A, B, seed, bins)
    edges = np.array([0.0, 1.0])
    return TVEstimate(edges, np.array([len(A)]), np.array([len(B)]),
                      0.0 if len(A) == len(B) == 0 else 1.0, (len(A), len(B)), 0.0)


def linear_chain_oracle(lam: float, rho: float, T: int, theta0: float,
                        noise_var: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Exact mean and variance of ``theta_t`` for ``H(theta, y) = theta - y`` in one dimension.

    The data stream is the stationary AR(1) with unit marginal variance and
    coefficient ``rho``; ``noise_var`` is the variance of each innovation.
    Propagates ``(E theta_t, Var theta_t, Cov(theta_t, Y_t))`` for ``t = 0..T``.
    """
    if not abs(rho) < 1:
        raise ValueError("need |rho| < 1")
    if not 0 < lam <= 1:
        raise ValueError("need 0 < lam <= 1")
    a = 1.0 - lam
    mean = np.empty(T + 1)
    var = np.empty(T + 1)
    mean[0], var[0] = float(theta0), 0.0
    c = 0.0
    for t in range(T):
        mean[t + 1] = a * mean[t]
        var[t + 1] = a * a * var[t] + 2.0 * a * lam * c + lam * lam + lam * noise_var
        c = rho * (a * c + lam)
    return mean, var


@dataclass(frozen=True)
class Moments:
    t: int
    mean: np.ndarray
    cov: np.ndarray
    n_used: int

    def to_dict(self) -> dict:
        return {"t": self.t, "n_used": self.n_used, "mean": self.mean.tolist(),
                "cov": self.cov.tolist()}


def ensemble_moments(result: EnsembleResult) -> list:
    """Unbiased mean and covariance of the surviving chains at each checkpoint.

    Checkpoints with fewer than two surviving chains yield ``None``.
    """
    out = []
    for t, snap in zip(result.times, result.snapshots):
        ok = snap[np.all(np.isfinite(snap), axis=1)]
        if len(ok) < 2:
            out.append(None)
            continue
        cov = np.atleast_2d(np.cov(ok, rowvar=False, ddof=1))
        out.append(Moments(int(t), ok.mean(axis=0), cov, len(ok)))
    return out
