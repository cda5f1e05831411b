"""Update functions ``H(theta, y)`` driving the recursion.

All ``H`` implementations are vectorised: ``theta`` has shape ``(n, d)`` and
``y`` has shape ``(n, m)``; :meth:`UpdateModel.H` also accepts single vectors.

Parameter packing is layer-major and row-major within each weight matrix. For
the one-layer regression model ``theta = (vec(W), g)`` with ``W`` of shape
``(d1, d0)``; for the multilayer model ``theta = (vec(W_1), ..., vec(W_n))``
with ``W_k`` of shape ``(d_k, d_{k-1})``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Activation", "TANH", "SIGMOID", "ACTIVATIONS", "PowerB", "DeclaredConstants",
    "UpdateModel", "linear_H", "linear_model", "zero_model", "anti_dissipative_model",
    "RegressionSpec", "regression_H", "regression_model", "MLPSpec", "tamed_mlp_H",
    "untamed_mlp_H", "tamed_mlp_model", "untamed_mlp_model", "finite_diff_grad",
]


@dataclass(frozen=True)
class Activation:
    """Componentwise activation with ``|s| <= bound`` and ``|s'| <= bound``."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    bound: float


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


TANH = Activation("tanh", np.tanh, lambda x: 1.0 - np.tanh(x) ** 2, 1.0)
SIGMOID = Activation("sigmoid", _sigmoid, lambda x: _sigmoid(x) * (1.0 - _sigmoid(x)), 1.0)
ACTIVATIONS = {a.name: a for a in (TANH, SIGMOID)}


@dataclass(frozen=True)
class PowerB:
    """The candidate function ``b(y) = scale * |y|^degree + offset``.

    Covers the half-square ``|y|^2/2`` of the linear benchmark and the
    quadratic / quartic forms needed by the network examples.
    """

    scale: float = 0.5
    degree: float = 2.0
    offset: float = 0.0

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.scale * np.linalg.norm(y, axis=-1) ** self.degree + self.offset

    def expectation(self, abs_moment: Callable[[float], float | None]) -> float | None:
        """``E b(Y)`` given a closed-form ``p -> E|Y|^p``."""
        mom = abs_moment(self.degree)
        return None if mom is None else self.scale * mom + self.offset

    def to_dict(self) -> dict:
        return {"scale": self.scale, "degree": self.degree, "offset": self.offset}

    @classmethod
    def quadratic(cls, c: float) -> "PowerB":
        """``c (1 + |y|^2)``."""
        return cls(c, 2.0, c)

    @classmethod
    def quartic(cls, c: float) -> "PowerB":
        """``c (1 + |y|^4)``."""
        return cls(c, 4.0, c)


@dataclass(frozen=True)
class DeclaredConstants:
    """Constants for dissipativity (``Delta``, ``b``) and growth (``K1..K3``, ``beta``)."""

    Delta: float
    b: PowerB
    K1: float
    K2: float
    K3: float
    beta: float

    def __post_init__(self):
        if self.beta < 1:
            raise ValueError("beta must be >= 1")
        if self.Delta <= 0:
            raise ValueError("Delta must be positive")
        if min(self.K1, self.K2, self.K3) < 0:
            raise ValueError("growth constants must be non-negative")


def _as_batch(x, dim, what):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"{what} must have trailing dimension {dim}, got shape {x.shape}")
    return x, single


@dataclass(frozen=True)
class UpdateModel:
    """An update function together with its dimensions and optional constants.

    ``func`` must be vectorised over a leading batch axis.
    """

    d: int
    m: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    constants: DeclaredConstants | None = None
    lambda_dependent: bool = False
    name: str = "custom"
    params: dict = field(default_factory=dict, compare=False)

    def H(self, theta, y) -> np.ndarray:
        theta, single = _as_batch(theta, self.d, "theta")
        y, single_y = _as_batch(y, self.m, "y")
        if theta.shape[0] != y.shape[0]:
            if y.shape[0] == 1:
                y = np.broadcast_to(y, (theta.shape[0], self.m))
            elif theta.shape[0] == 1:
                theta = np.broadcast_to(theta, (y.shape[0], self.d))
                single = False
            else:
                raise ValueError("theta and y batch sizes differ")
        out = self.func(theta, y)
        return out[0] if single and single_y else out

    __call__ = H


def linear_H(theta, y) -> np.ndarray:
    """``theta - y`` (requires ``m == d``)."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float)
    if theta.shape[-1] != y.shape[-1]:
        raise ValueError("linear_H needs m == d")
    return theta - y


def linear_model(d: int = 1) -> UpdateModel:
    """Closed-form benchmark ``H(theta, y) = theta - y``.

    Exact constants: ``Delta = 1/2`` with ``b(y) = |y|^2/2`` (Young) and
    ``(K1, K2, K3, beta) = (1, 1, 0, 1)`` (triangle inequality).
    """
    consts = DeclaredConstants(0.5, PowerB(0.5, 2.0, 0.0), 1.0, 1.0, 0.0, 1.0)
    return UpdateModel(d, d, linear_H, consts, name="linear")


def zero_model(d: int = 1, m: int = 1) -> UpdateModel:
    return UpdateModel(d, m, lambda th, y: np.zeros_like(th), name="zero")


def anti_dissipative_model(d: int = 1, m: int = 1) -> UpdateModel:
    """``H(theta, y) = -theta``; pushes every state outward."""
    return UpdateModel(d, m, lambda th, y: -th, name="anti_dissipative")


# --------------------------------------------------------------------------------------
# One-layer nonlinear regression


@dataclass(frozen=True)
class RegressionSpec:
    """``h(z, theta) = s(W z + g)``, loss ``|h - l|^2 + kappa |theta|^2``.

    ``kappa = 0`` is accepted for gradient checks; dissipativity needs ``kappa > 0``.
    """

    d0: int
    d1: int
    kappa: float = 0.1
    activation: Activation = TANH

    def __post_init__(self):
        if self.kappa < 0:
            raise ValueError("kappa must be non-negative")

    @property
    def d(self) -> int:
        return self.d0 * self.d1 + self.d1

    @property
    def m(self) -> int:
        return self.d0 + self.d1

    def unpack(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.d:
            raise ValueError(f"expected packed length {self.d}, got {theta.shape[-1]}")
        k = self.d0 * self.d1
        W = theta[..., :k].reshape(theta.shape[:-1] + (self.d1, self.d0))
        return W, theta[..., k:]

    def pack(self, W, g) -> np.ndarray:
        W = np.asarray(W, dtype=float)
        return np.concatenate([W.reshape(W.shape[:-2] + (-1,)), np.asarray(g, dtype=float)], axis=-1)

    def split_y(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.m:
            raise ValueError(f"expected data dimension {self.m}, got {y.shape[-1]}")
        return y[..., :self.d0], y[..., self.d0:]

    def loss(self, theta, y):
        W, g = self.unpack(theta)
        z, l = self.split_y(y)
        h = self.activation.f(np.einsum("...ji,...i->...j", W, z) + g)
        return ((h - l) ** 2).sum(axis=-1) + self.kappa * (np.asarray(theta) ** 2).sum(axis=-1)


def regression_H(spec: RegressionSpec, theta, y) -> np.ndarray:
    """Analytic gradient of the regression loss in ``theta``."""
    theta = np.asarray(theta, dtype=float)
    W, g = spec.unpack(theta)
    z, l = spec.split_y(y)
    a = np.einsum("...ji,...i->...j", W, z) + g
    delta = 2.0 * (spec.activation.f(a) - l) * spec.activation.df(a)
    gW = delta[..., :, None] * z[..., None, :]
    return spec.pack(gW, delta) + 2.0 * spec.kappa * theta


def regression_model(spec: RegressionSpec) -> UpdateModel:
    return UpdateModel(spec.d, spec.m, lambda th, y: regression_H(spec, th, y),
                       name="regression", params={"spec": spec})


# --------------------------------------------------------------------------------------
# Multilayer network without bias terms, optionally tamed


@dataclass(frozen=True)
class MLPSpec:
    """Network ``z -> s(W_n s(... s(W_1 z)))`` with loss
    ``|h - l|^2 + eta/(2(r+1)) |theta|^{2(r+1)}``.

    ``r`` defaults to ``(n+2)/2``, or ``(n+1)/2`` when ``quartic_b`` is set
    (the relaxed taming exponent that pairs with a degree-4 ``b``).
    ``lam`` is the step size baked into the tamed update.
    """

    dims: tuple
    eta: float = 1.0
    lam: float = 0.01
    r: float | None = None
    activation: Activation = TANH
    quartic_b: bool = False

    def __post_init__(self):
        dims = tuple(int(k) for k in self.dims)
        if len(dims) < 3 or min(dims) < 1:
            raise ValueError("need at least one hidden layer: dims = (d0, d1, ..., dn), n > 1")
        object.__setattr__(self, "dims", dims)
        if self.r is None:
            object.__setattr__(self, "r", self.default_r(len(dims) - 1, self.quartic_b))
        if self.eta <= 0 or self.r < 0:
            raise ValueError("need eta > 0 and r >= 0")
        if not 0 < self.lam <= 1:
            raise ValueError("lam must lie in (0, 1]")

    @staticmethod
    def default_r(n_layers: int, quartic_b: bool = False) -> float:
        return (n_layers + 1) / 2 if quartic_b else (n_layers + 2) / 2

    @property
    def n_layers(self) -> int:
        return len(self.dims) - 1

    @property
    def shapes(self) -> list:
        return [(self.dims[k], self.dims[k - 1]) for k in range(1, len(self.dims))]

    @property
    def d(self) -> int:
        return sum(a * b for a, b in self.shapes)

    @property
    def m(self) -> int:
        return self.dims[0] + self.dims[-1]

    def unpack(self, theta) -> list:
        theta = np.asarray(theta, dtype=float)
        if theta.shape[-1] != self.d:
            raise ValueError(f"expected packed length {self.d}, got {theta.shape[-1]}")
        out, start = [], 0
        for rows, cols in self.shapes:
            out.append(theta[..., start:start + rows * cols].reshape(theta.shape[:-1] + (rows, cols)))
            start += rows * cols
        return out

    def pack(self, Ws) -> np.ndarray:
        return np.concatenate([np.asarray(W).reshape(np.shape(W)[:-2] + (-1,)) for W in Ws], axis=-1)

    def split_y(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.m:
            raise ValueError(f"expected data dimension {self.m}, got {y.shape[-1]}")
        return y[..., :self.dims[0]], y[..., self.dims[0]:]

    def predict(self, theta, z):
        x = np.asarray(z, dtype=float)
        for W in self.unpack(theta):
            x = self.activation.f(np.einsum("...ji,...i->...j", W, x))
        return x

    def loss(self, theta, y):
        z, l = self.split_y(y)
        theta = np.asarray(theta, dtype=float)
        norm2 = (theta ** 2).sum(axis=-1)
        reg = self.eta / (2.0 * (self.r + 1.0)) * norm2 ** (self.r + 1.0)
        return ((self.predict(theta, z) - l) ** 2).sum(axis=-1) + reg

    def grad(self, theta, y) -> np.ndarray:
        """Reverse-mode gradient of :meth:`loss`."""
        theta = np.asarray(theta, dtype=float)
        Ws = self.unpack(theta)
        z, l = self.split_y(y)
        s = self.activation
        xs, pre = [z], []
        for W in Ws:
            a = np.einsum("...ji,...i->...j", W, xs[-1])
            pre.append(a)
            xs.append(s.f(a))
        delta = 2.0 * (xs[-1] - l) * s.df(pre[-1])
        grads = [None] * len(Ws)
        for k in range(len(Ws) - 1, -1, -1):
            grads[k] = delta[..., :, None] * xs[k][..., None, :]
            if k:
                delta = np.einsum("...ji,...j->...i", Ws[k], delta) * s.df(pre[k - 1])
        norm2 = (theta ** 2).sum(axis=-1, keepdims=True)
        with np.errstate(over="ignore", invalid="ignore"):
            return self.pack(grads) + self.eta * norm2 ** self.r * theta

    def taming_factor(self, theta) -> np.ndarray:
        norm2 = (np.asarray(theta, dtype=float) ** 2).sum(axis=-1, keepdims=True)
        with np.errstate(over="ignore"):
            return 1.0 + math.sqrt(self.lam) * norm2 ** self.r


def tamed_mlp_H(spec: MLPSpec, theta, y) -> np.ndarray:
    """``G(theta, y) / (1 + sqrt(lam) |theta|^{2r})`` with ``G`` the loss gradient."""
    G = spec.grad(theta, y)
    with np.errstate(over="ignore", invalid="ignore"):
        return G / spec.taming_factor(theta)


def untamed_mlp_H(spec: MLPSpec, theta, y) -> np.ndarray:
    """Raw loss gradient; plain SGLD with this update blows up from large starts."""
    return spec.grad(theta, y)


def tamed_mlp_model(spec: MLPSpec) -> UpdateModel:
    return UpdateModel(spec.d, spec.m, lambda th, y: tamed_mlp_H(spec, th, y),
                       lambda_dependent=True, name="tamed_mlp", params={"spec": spec})


def untamed_mlp_model(spec: MLPSpec) -> UpdateModel:
    return UpdateModel(spec.d, spec.m, lambda th, y: untamed_mlp_H(spec, th, y),
                       name="untamed_mlp", params={"spec": spec})


def finite_diff_grad(U: Callable, theta, y, h: float = 1e-5) -> np.ndarray:
    """Central differences ``(U(theta + h e_i, y) - U(theta - h e_i, y)) / 2h``."""
    if not h > 0:
        raise ValueError("h must be positive")
    theta = np.asarray(theta, dtype=float)
    d = theta.shape[-1]
    E = h * np.eye(d)
    up = U(theta[..., None, :] + E, np.asarray(y, dtype=float)[..., None, :])
    dn = U(theta[..., None, :] - E, np.asarray(y, dtype=float)[..., None, :])
    return (np.asarray(up) - np.asarray(dn)) / (2.0 * h)
