"""Innovation laws for the Langevin recursion.

Every supported law has independent, mean-zero coordinates and a density that
is strictly positive on compacts. ``sigma2`` is always the second moment of the
*whole* vector, ``E|xi|^2 = d * (per-coordinate variance)``; this is the
quantity that enters the drift constant ``K(y)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["NoiseModel", "UnsupportedNoiseError"]

_KINDS = ("gaussian", "gaussian2", "laplace", "zero")
_FORBIDDEN = ("uniform", "uniform_box", "box")


class UnsupportedNoiseError(ValueError):
    """Raised when a noise law has no usable density (e.g. uniform or degenerate)."""


@dataclass(frozen=True)
class NoiseModel:
    """Product noise law on ``R^d``.

    Parameters
    ----------
    d : int
        Dimension.
    kind : str
        ``"gaussian"`` (unit variance per coordinate), ``"gaussian2"``
        (variance 2 per coordinate, which turns the recursion into the plain
        unadjusted Langevin scheme), ``"laplace"`` (scale ``scale``) or
        ``"zero"``. The zero law is a degenerate point mass kept for
        deterministic tests; it has no density and is rejected wherever a
        density is needed.
    scale : float
        Laplace scale ``b_L``. Ignored by the other kinds.
    """

    d: int
    kind: str = "gaussian"
    scale: float = 1.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"noise dimension must be a positive integer, got {self.d!r}")
        if self.kind in _FORBIDDEN:
            raise UnsupportedNoiseError(
                f"noise kind {self.kind!r} has a density vanishing on compacts")
        if self.kind not in _KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {_KINDS}")
        if self.kind == "laplace" and not self.scale > 0:
            raise ValueError("laplace scale must be positive")

    @classmethod
    def gaussian(cls, d: int, variance: float = 1.0) -> "NoiseModel":
        if variance == 1.0:
            return cls(d, "gaussian")
        if variance == 2.0:
            return cls(d, "gaussian2")
        raise ValueError("only per-coordinate variance 1 or 2 is supported")

    @classmethod
    def laplace(cls, d: int, scale: float = 1.0) -> "NoiseModel":
        return cls(d, "laplace", scale)

    @classmethod
    def zero(cls, d: int) -> "NoiseModel":
        return cls(d, "zero")

    @property
    def coord_variance(self) -> float:
        return {"gaussian": 1.0, "gaussian2": 2.0,
                "laplace": 2.0 * self.scale ** 2, "zero": 0.0}[self.kind]

    @property
    def sigma2(self) -> float:
        """Full-vector second moment ``E|xi|^2``."""
        return self.d * self.coord_variance

    @property
    def has_density(self) -> bool:
        return self.kind != "zero"

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Draw one vector (``size=None``) or an array of shape ``(size, d)``."""
        shape = (self.d,) if size is None else (size, self.d)
        if self.kind == "gaussian":
            return rng.standard_normal(shape)
        if self.kind == "gaussian2":
            return math.sqrt(2.0) * rng.standard_normal(shape)
        if self.kind == "laplace":
            return rng.laplace(0.0, self.scale, shape)
        return np.zeros(shape)

    def log_density(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"expected last dimension {self.d}, got {x.shape[-1]}")
        self._require_density()
        if self.kind == "laplace":
            b = self.scale
            return -self.d * math.log(2.0 * b) - np.abs(x).sum(axis=-1) / b
        v = self.coord_variance
        return -0.5 * self.d * math.log(2.0 * math.pi * v) - 0.5 * (x * x).sum(axis=-1) / v

    def density(self, x) -> np.ndarray | float:
        """Product density ``f(x)``; vectorised over leading axes."""
        return np.exp(self.log_density(x))

    def log_inf_density_on_ball(self, R: float) -> float:
        if R < 0:
            raise ValueError("radius must be non-negative")
        self._require_density()
        if self.kind == "laplace":
            # max of |x|_1 on the Euclidean sphere of radius R is R*sqrt(d)
            b = self.scale
            return -self.d * math.log(2.0 * b) - R * math.sqrt(self.d) / b
        v = self.coord_variance
        return -0.5 * self.d * math.log(2.0 * math.pi * v) - 0.5 * R * R / v

    def inf_density_on_ball(self, R: float) -> float:
        """Exact infimum of the density over the closed ball of radius ``R``."""
        return math.exp(self.log_inf_density_on_ball(R))

    def _require_density(self):
        if not self.has_density:
            raise UnsupportedNoiseError("the zero noise law has no Lebesgue density")

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "d": self.d}
        if self.kind == "laplace":
            out["scale"] = self.scale
        return out
