"""Strictly stationary data streams feeding the gradient estimates.

Every stream is driven by standard normal draws only: ``init_dim`` of them to
draw the stationary initial state and ``innov_dim`` per emitted value. The
deterministic maps ``_init`` and ``_emit`` work on a leading batch axis, which
lets the chain engine advance thousands of independent paths at once while
each path still consumes its own generator.

Paths are indexed by ``t = 0, 1, ...`` and start from the stationary law, so
``Y_0`` already has the stationary marginal.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .models import Activation, TANH

__all__ = [
    "StationaryStream", "ZeroStream", "IIDGaussianStream", "AR1Stream",
    "BoundedStream", "RegressionStream", "MomentEstimate", "estimate_moments",
    "gaussian_abs_moment",
]


def gaussian_abs_moment(m: int, p: float) -> float:
    """``E|Y|^p`` for a standard normal vector in ``R^m`` (chi distribution)."""
    return math.exp(0.5 * p * math.log(2.0) + gammaln(0.5 * (m + p)) - gammaln(0.5 * m))


class StationaryStream:
    """Base class. Subclasses set ``m``, ``init_dim``, ``innov_dim``."""

    m: int
    init_dim: int = 0
    innov_dim: int = 0

    # -- batched deterministic maps -------------------------------------------------
    def _init(self, z: np.ndarray):
        return None

    def _emit(self, state, e: np.ndarray):
        raise NotImplementedError

    # -- single-path API ------------------------------------------------------------
    def stationary_init(self, rng: np.random.Generator):
        """Draw the stationary initial state (``None`` for memoryless streams)."""
        z = rng.standard_normal((1, self.init_dim))
        return self._init(z)

    def next(self, rng: np.random.Generator, state):
        """Emit one data point and return ``(y, new_state)``."""
        e = rng.standard_normal((1, self.innov_dim))
        y, state = self._emit(state, e)
        return y[0], state

    def sample_path(self, rng: np.random.Generator, T: int) -> np.ndarray:
        """Return ``Y_0, ..., Y_{T-1}`` as a ``(T, m)`` array."""
        state = self.stationary_init(rng)
        e = rng.standard_normal((T, self.innov_dim))
        out = np.empty((T, self.m))
        for t in range(T):
            y, state = self._emit(state, e[t:t + 1])
            out[t] = y[0]
        return out

    def stationary_sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` independent draws of ``Y_0``."""
        state = self._init(rng.standard_normal((n, self.init_dim)))
        y, _ = self._emit(state, rng.standard_normal((n, self.innov_dim)))
        return y

    def abs_moment(self, p: float) -> float | None:
        """Closed-form ``E|Y_0|^p`` when available."""
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroStream(StationaryStream):
    """The deterministic stream ``Y_t = 0``."""

    m: int = 1

    def _emit(self, state, e):
        return np.zeros((e.shape[0], self.m)), state

    def abs_moment(self, p):
        return 0.0 if p > 0 else 1.0

    def to_dict(self):
        return {"kind": "zero", "m": self.m}


@dataclass(frozen=True)
class IIDGaussianStream(StationaryStream):
    m: int = 1

    @property
    def innov_dim(self):
        return self.m

    def _emit(self, state, e):
        return e.copy(), state

    def abs_moment(self, p):
        return gaussian_abs_moment(self.m, p)

    def to_dict(self):
        return {"kind": "iid_gaussian", "m": self.m}


@dataclass(frozen=True)
class AR1Stream(StationaryStream):
    """Coordinatewise AR(1), ``Y_{t+1} = rho Y_t + sqrt(1-rho^2) e_{t+1}``.

    Innovations are scaled so the stationary marginal is exactly ``N(0, I_m)``.
    """

    rho: float = 0.0
    m: int = 1

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise ValueError(f"AR(1) coefficient must satisfy |rho| < 1, got {self.rho}")

    @property
    def init_dim(self):
        return self.m

    @property
    def innov_dim(self):
        return self.m

    def _init(self, z):
        return z.copy()

    def _emit(self, state, e):
        y = state
        return y, self.rho * state + math.sqrt(1.0 - self.rho ** 2) * e

    def abs_moment(self, p):
        return gaussian_abs_moment(self.m, p)

    def to_dict(self):
        return {"kind": "ar1", "rho": self.rho, "m": self.m}


def _tanh_profile(r):
    return np.tanh(r)


@dataclass(frozen=True)
class BoundedStream(StationaryStream):
    """Radial squashing ``Y = B * s(|X|) X/|X|`` of an inner stream.

    With ``s = tanh`` the Euclidean norm of every output is at most ``B``.
    """

    inner: StationaryStream = field(default_factory=IIDGaussianStream)
    bound: float = 1.0
    profile: Callable[[np.ndarray], np.ndarray] = _tanh_profile

    def __post_init__(self):
        if not self.bound > 0:
            raise ValueError("bound must be positive")

    @property
    def m(self):
        return self.inner.m

    @property
    def init_dim(self):
        return self.inner.init_dim

    @property
    def innov_dim(self):
        return self.inner.innov_dim

    def _init(self, z):
        return self.inner._init(z)

    def _emit(self, state, e):
        x, state = self.inner._emit(state, e)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0, self.bound * np.clip(self.profile(r), 0.0, 1.0) / r, 0.0)
        return x * scale, state

    def to_dict(self):
        return {"kind": "bounded", "bound": self.bound, "inner": self.inner.to_dict()}


@dataclass(frozen=True, eq=False)
class RegressionStream(StationaryStream):
    """Labelled pairs ``Y_t = (Z_t, L_t)`` with dependent features.

    ``Z_t`` is a coordinatewise stationary AR(1) in ``R^{d0}`` and
    ``L_t = s(W* Z_t + g*) + label_sd * eps_t``. ``weights`` has shape
    ``(d1, d0)`` (row ``j`` feeds output ``j``); ``bias`` has length ``d1``.
    """

    weights: np.ndarray = None
    bias: np.ndarray = None
    rho: float = 0.0
    label_sd: float = 0.1
    activation: Activation = TANH

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "weights", W)
        g = np.zeros(W.shape[0]) if self.bias is None else np.asarray(self.bias, dtype=float)
        if g.shape != (W.shape[0],):
            raise ValueError("bias length must equal the number of weight rows")
        object.__setattr__(self, "bias", g)
        if not abs(self.rho) < 1:
            raise ValueError(f"AR(1) coefficient must satisfy |rho| < 1, got {self.rho}")
        if self.label_sd < 0:
            raise ValueError("label_sd must be non-negative")

    @property
    def d0(self):
        return self.weights.shape[1]

    @property
    def d1(self):
        return self.weights.shape[0]

    @property
    def m(self):
        return self.d0 + self.d1

    @property
    def init_dim(self):
        return self.d0

    @property
    def innov_dim(self):
        return self.d0 + self.d1

    def _init(self, z):
        return z.copy()

    def _emit(self, state, e):
        z = state
        label = self.activation.f(z @ self.weights.T + self.bias) + self.label_sd * e[:, self.d0:]
        new = self.rho * z + math.sqrt(1.0 - self.rho ** 2) * e[:, :self.d0]
        return np.concatenate([z, label], axis=1), new

    def to_dict(self):
        return {"kind": "regression", "weights": self.weights.tolist(),
                "bias": self.bias.tolist(), "rho": self.rho, "label_sd": self.label_sd,
                "activation": self.activation.name}


@dataclass(frozen=True)
class MomentEstimate:
    M_y: float
    M_y_se: float
    M_b: float
    M_b_se: float
    n: int


def estimate_moments(stream: StationaryStream, beta: float, b: Callable, N: int,
                     rng: np.random.Generator) -> MomentEstimate:
    """Monte Carlo estimates of ``E|Y_0|^{2 beta}`` and ``E b(Y_0)``.

    ``b`` maps an ``(N, m)`` array to ``N`` non-negative values.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if beta < 1:
        raise ValueError("beta must be >= 1")
    y = stream.stationary_sample(rng, N)
    my = np.linalg.norm(y, axis=1) ** (2.0 * beta)
    mb = np.asarray(b(y), dtype=float).reshape(N)
    bad = np.flatnonzero(~np.isfinite(mb))
    if bad.size:
        i = int(bad[0])
        raise ValueError(f"b is not finite at sample {i}: y={y[i].tolist()}, b={mb[i]}")

    def se(v):
        return float(v.std(ddof=1) / math.sqrt(N)) if N > 1 else math.inf

    return MomentEstimate(float(my.mean()), se(my), float(mb.mean()), se(mb), N)
