"""Computable drift, moment and minorization certificates.

With ``V(theta) = |theta|^2`` and constants ``(Delta, b)`` / ``(K1, K2, K3, beta)``,
one step of the recursion satisfies

    E V(theta') <= gamma V(theta) + K(y),
    gamma = 1 - 2 lam Delta + 3 lam^2 K1^2,
    K(y)  = lam (sigma2 + 2 b(y)) + 3 lam^2 (K2^2 |y|^{2 beta} + K3^2),

and on the ball ``B_n`` the one-step kernel dominates ``alpha_n`` times the
uniform law on ``B_n``. The classes below evaluate these quantities exactly and
the ``verify_*`` functions test them by Monte Carlo with a 3-standard-error
band.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .models import UpdateModel
from .noise import NoiseModel, UnsupportedNoiseError

__all__ = [
    "StepSizeError", "DriftCertificate", "drift_constants", "drift_threshold",
    "DriftPoint", "DriftReport", "verify_drift_mc", "compose_drift", "MomentBound",
    "moment_bound", "log_ball_volume", "ball_volume", "MinorizationCertificate",
    "minorization_cert", "Ball", "HalfBall", "EmptySet", "MinorizationCheck",
    "verify_minorization_mc",
]

SE_BAND = 3.0


class StepSizeError(ValueError):
    """The step size is too large for ``gamma < 1``."""

    def __init__(self, lam, threshold):
        super().__init__(
            f"step size {lam} exceeds drift threshold 2*Delta/(3*K1^2) = {threshold:.17g}")
        self.lam = lam
        self.threshold = threshold


def drift_threshold(Delta: float, K1: float) -> float:
    """Largest admissible step (exclusive): ``2 Delta / (3 K1^2)``."""
    return math.inf if K1 == 0 else 2.0 * Delta / (3.0 * K1 * K1)


@dataclass(frozen=True)
class DriftCertificate:
    gamma: float
    lam: float
    Delta: float
    K1: float
    K2: float
    K3: float
    beta: float
    sigma2: float
    b: Callable

    def K(self, y) -> np.ndarray | float:
        """``lam (sigma2 + 2 b(y)) + 3 lam^2 (K2^2 |y|^{2 beta} + K3^2)``."""
        y = np.asarray(y, dtype=float)
        ny = np.linalg.norm(y, axis=-1)
        lam = self.lam
        return (lam * (self.sigma2 + 2.0 * np.asarray(self.b(y)))
                + 3.0 * lam * lam * (self.K2 ** 2 * ny ** (2.0 * self.beta) + self.K3 ** 2))

    def expected_K(self, M_b: float, M_y: float) -> float:
        """``E K(Y_0)`` when ``E b(Y_0) = M_b`` and ``E|Y_0|^{2 beta} = M_y``."""
        lam = self.lam
        return lam * (self.sigma2 + 2.0 * M_b) + 3.0 * lam * lam * (self.K2 ** 2 * M_y + self.K3 ** 2)

    def bound(self, theta, y) -> np.ndarray | float:
        theta = np.asarray(theta, dtype=float)
        return self.gamma * (theta * theta).sum(axis=-1) + self.K(y)

    def to_dict(self) -> dict:
        b = self.b.to_dict() if hasattr(self.b, "to_dict") else repr(self.b)
        return {"gamma": self.gamma, "lambda": self.lam, "Delta": self.Delta, "K1": self.K1,
                "K2": self.K2, "K3": self.K3, "beta": self.beta, "sigma2": self.sigma2,
                "b": b, "threshold": drift_threshold(self.Delta, self.K1)}


def drift_constants(Delta, K1, K2, K3, beta, b, sigma2, lam) -> DriftCertificate:
    """Build the one-step drift certificate; raises :class:`StepSizeError` if ``gamma >= 1``."""
    if not lam > 0:
        raise ValueError("step size must be positive")
    if Delta <= 0 or min(K1, K2, K3) < 0 or beta < 1 or sigma2 < 0:
        raise ValueError("need Delta > 0, K1, K2, K3 >= 0, beta >= 1, sigma2 >= 0")
    thr = drift_threshold(Delta, K1)
    if not lam < thr:
        raise StepSizeError(lam, thr)
    gamma = 1.0 - 2.0 * lam * Delta + 3.0 * lam * lam * K1 * K1
    if not gamma > 0:
        raise ValueError(f"gamma = {gamma} is not positive; Delta is inconsistent with K1")
    return DriftCertificate(gamma, lam, Delta, K1, K2, K3, beta, sigma2, b)


@dataclass(frozen=True)
class DriftPoint:
    theta: tuple
    y: tuple
    lhs: float
    se: float
    rhs: float
    note: str = ""

    @property
    def violated(self) -> bool:
        return bool(self.note) or not self.lhs <= self.rhs + SE_BAND * self.se


@dataclass
class DriftReport:
    points: list
    n_samples: int

    @property
    def violations(self) -> list:
        return [p for p in self.points if p.violated]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {"passed": self.passed, "n_points": len(self.points), "n_samples": self.n_samples,
                "violations": [p.__dict__ for p in self.violations]}


def _spawn(rng: np.random.Generator, n: int) -> list:
    return rng.spawn(n)


def verify_drift_mc(model: UpdateModel, noise: NoiseModel, lam: float, cert: DriftCertificate,
                    theta_grid, y_grid, N: int, rng: np.random.Generator) -> DriftReport:
    """Check ``E|theta - lam H + sqrt(lam) xi|^2 <= gamma |theta|^2 + K(y) + 3 SE``
    at every pair of the product grid. Each pair gets its own spawned generator."""
    if N < 1000:
        raise ValueError("use at least 1000 Monte Carlo samples")
    thetas = np.atleast_2d(np.asarray(theta_grid, dtype=float))
    ys = np.atleast_2d(np.asarray(y_grid, dtype=float))
    if thetas.shape[1] != model.d or ys.shape[1] != model.m:
        raise ValueError("grid dimensions do not match the model")
    gens = _spawn(rng, len(thetas) * len(ys))
    sq = math.sqrt(lam)
    points = []
    for i, th in enumerate(thetas):
        for j, y in enumerate(ys):
            g = gens[i * len(ys) + j]
            rhs = float(cert.bound(th, y))
            with np.errstate(over="ignore", invalid="ignore"):
                h = model.H(th, y)
            if not np.all(np.isfinite(h)):
                points.append(DriftPoint(tuple(th), tuple(y), math.nan, math.nan, rhs, "non-finite H"))
                continue
            mean = th - lam * h
            v = ((mean + sq * noise.sample(g, N)) ** 2).sum(axis=1)
            points.append(DriftPoint(tuple(th), tuple(y), float(v.mean()),
                                     float(v.std(ddof=1) / math.sqrt(N)), rhs))
    return DriftReport(points, N)


def compose_drift(cert: DriftCertificate, theta, y_sequence: Sequence) -> float:
    """``gamma^k V(theta) + sum_{i=1}^k gamma^{i-1} K(y_i)``.

    ``y_sequence = (y_1, ..., y_k)`` where ``y_1`` is the environment of the
    *last* step applied; only the ordering of the weights depends on this.
    """
    ys = np.asarray(y_sequence, dtype=float)
    if ys.ndim == 1:
        ys = ys[:, None]
    k = len(ys)
    if k < 1:
        raise ValueError("need at least one environment value")
    theta = np.asarray(theta, dtype=float)
    Ks = np.asarray(cert.K(ys), dtype=float)
    weights = cert.gamma ** np.arange(k)
    return float(cert.gamma ** k * (theta * theta).sum() + (weights * Ks).sum())


@dataclass(frozen=True)
class MomentBound:
    value: float
    theta0: tuple
    gamma: float
    sigma2: float
    M_b: float
    K2: float
    K3: float
    M_y: float

    def tail_bound(self, n: float) -> float:
        """Markov bound on ``P(|theta_t| > n)`` valid for every ``t``."""
        return min(1.0, self.value / (n * n))

    def to_dict(self) -> dict:
        return dict(self.__dict__, theta0=list(self.theta0))


def moment_bound(theta0, cert: DriftCertificate, M_b: float, M_y: float) -> MomentBound:
    """``|theta0|^2 + gamma/(1-gamma) [(sigma2 + 2 M_b) + 3 (K2^2 M_y + K3^2)]``."""
    g = cert.gamma
    if not 0 <= g < 1:
        raise ValueError("gamma must lie in [0, 1)")
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    value = float((theta0 ** 2).sum() + g / (1.0 - g) * (
        (cert.sigma2 + 2.0 * M_b) + 3.0 * (cert.K2 ** 2 * M_y + cert.K3 ** 2)))
    return MomentBound(value, tuple(theta0.tolist()), g, cert.sigma2, M_b, cert.K2, cert.K3, M_y)


# --------------------------------------------------------------------------------------
# Minorization


def log_ball_volume(d: int, r: float) -> float:
    """``log Leb(B_r)`` in ``R^d``."""
    if r <= 0:
        return -math.inf
    return 0.5 * d * math.log(math.pi) + d * math.log(r) - gammaln(0.5 * d + 1.0)


def ball_volume(d: int, r: float) -> float:
    return math.exp(log_ball_volume(d, r))


@dataclass(frozen=True)
class MinorizationCertificate:
    """``Q(theta, y, A) >= alpha_n Leb(A & B_n)/Leb(B_n)`` for ``|theta|, |y| <= n``."""

    n: float
    R: float
    C: float
    log_C: float
    alpha: float
    log_alpha: float
    clamped: bool
    lam: float
    d: int

    @property
    def raw_alpha(self) -> float:
        return math.exp(self.log_alpha)

    def nu(self, A) -> float:
        """Uniform law on ``B_n`` evaluated at ``A``."""
        return A.nu(self.n, self.d)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["nu"] = {"kind": "uniform_ball", "radius": self.n}
        if self.clamped:
            out["note"] = "alpha_n exceeded 1 and was clamped to 1"
        return out


def minorization_cert(K1, K2, K3, beta, lam, noise: NoiseModel, n, d=None) -> MinorizationCertificate:
    """Radius ``R(n)``, density floor ``C(n)`` and ``alpha_n`` in log space."""
    if n < 1 or not lam > 0:
        raise ValueError("need n >= 1 and lam > 0")
    d = noise.d if d is None else d
    if d != noise.d:
        raise ValueError(f"noise dimension {noise.d} differs from d={d}")
    if not noise.has_density:
        raise UnsupportedNoiseError("minorization needs a noise law with a positive density")
    R = (2.0 * n + lam * (K1 * n + K2 * n ** beta + K3)) / math.sqrt(lam)
    log_C = noise.log_inf_density_on_ball(R)
    log_alpha = float(log_C + log_ball_volume(d, n) - 0.5 * d * math.log(lam))
    clamped = log_alpha > 0
    return MinorizationCertificate(float(n), R, math.exp(log_C), log_C,
                                   1.0 if clamped else math.exp(log_alpha), log_alpha,
                                   clamped, lam, d)


@dataclass(frozen=True)
class Ball:
    """Closed ball; assumed to lie inside ``B_n`` when used as a test set."""

    center: tuple
    radius: float

    def contains(self, x):
        c = np.asarray(self.center, dtype=float)
        return np.linalg.norm(np.asarray(x) - c, axis=-1) <= self.radius

    def nu(self, n, d):
        c = np.asarray(self.center, dtype=float)
        if np.linalg.norm(c) + self.radius > n * (1 + 1e-12):
            raise ValueError("test ball must lie inside B_n")
        return (self.radius / n) ** d


@dataclass(frozen=True)
class HalfBall:
    """``{x in B_n : x[axis] >= 0}`` (or ``<= 0`` when ``upper`` is False)."""

    n: float
    axis: int = 0
    upper: bool = True

    def contains(self, x):
        x = np.asarray(x)
        side = x[..., self.axis] >= 0 if self.upper else x[..., self.axis] <= 0
        return side & (np.linalg.norm(x, axis=-1) <= self.n)

    def nu(self, n, d):
        if self.n != n:
            raise ValueError("half ball radius must equal n")
        return 0.5


@dataclass(frozen=True)
class EmptySet:
    def contains(self, x):
        return np.zeros(np.shape(x)[:-1], dtype=bool)

    def nu(self, n, d):
        return 0.0


@dataclass(frozen=True)
class MinorizationCheck:
    q_hat: float
    se: float
    lower: float
    n_samples: int

    @property
    def passed(self) -> bool:
        return bool(self.q_hat >= self.lower - SE_BAND * self.se)

    def to_dict(self) -> dict:
        return dict(self.__dict__, passed=self.passed)


def verify_minorization_mc(model: UpdateModel, noise: NoiseModel, cert: MinorizationCertificate,
                           theta, y, A, N: int, rng: np.random.Generator) -> MinorizationCheck:
    """Estimate ``P(theta - lam H + sqrt(lam) xi in A)`` and compare with ``alpha_n nu_n(A)``."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    tol = cert.n * (1 + 1e-12)
    if np.linalg.norm(theta) > tol or np.linalg.norm(y) > tol:
        raise ValueError("theta and y must lie in B_n")
    lower = cert.alpha * cert.nu(A)
    mean = theta - cert.lam * model.H(theta, y)
    hits = A.contains(mean + math.sqrt(cert.lam) * noise.sample(rng, N))
    p = float(hits.mean())
    return MinorizationCheck(p, math.sqrt(p * (1 - p) / N), lower, N)
