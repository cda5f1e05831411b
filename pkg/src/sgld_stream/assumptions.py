"""Sampled checks of the dissipativity and growth conditions.

A passing report means *no violation was found on the grid*; it is a pointwise
certificate, not a proof of the universally quantified statement.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from .models import UpdateModel
from .streams import StationaryStream

__all__ = [
    "SamplingGrid", "radial_grid", "default_grid", "Violation", "AssumptionReport",
    "check_dissipativity", "check_growth", "ConstantsFit", "fit_constants",
    "DELTA_LOG_GRID", "BETA_CANDIDATES",
]

DEFAULT_RADII = (0.1, 1.0, 10.0, 100.0, 1e3)
DELTA_LOG_GRID = 2.0 ** (np.arange(-80, 25) / 8.0)
BETA_CANDIDATES = (1.0, 2.0, 3.0, 4.0)
_MAX_KEPT = 100
_CHUNK = 1 << 18


@dataclass
class SamplingGrid:
    """All pairs ``(theta_i, y_j)`` of the two point sets are tested."""

    thetas: np.ndarray
    ys: np.ndarray
    description: dict = field(default_factory=dict)

    def __post_init__(self):
        self.thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        self.ys = np.atleast_2d(np.asarray(self.ys, dtype=float))

    @property
    def size(self) -> int:
        return len(self.thetas) * len(self.ys)

    def pairs(self):
        """Yield ``(i_theta, theta_block, y_block)`` chunks over the product grid."""
        nt, ny = len(self.thetas), len(self.ys)
        per = max(1, _CHUNK // max(1, ny * (self.thetas.shape[1] + self.ys.shape[1])))
        for start in range(0, nt, per):
            th = self.thetas[start:start + per]
            yield (np.repeat(np.arange(start, start + len(th)), ny),
                   np.repeat(th, ny, axis=0), np.tile(self.ys, (len(th), 1)))

    def scaled(self, theta_factor=1.0, y_factor=1.0) -> "SamplingGrid":
        return SamplingGrid(self.thetas * theta_factor, self.ys * y_factor,
                            dict(self.description, theta_factor=theta_factor, y_factor=y_factor))


def radial_grid(d: int, ys, radii=DEFAULT_RADII, n_directions: int = 64,
                rng: np.random.Generator | None = None) -> SamplingGrid:
    """Directions uniform on the sphere times the given radii."""
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        dirs = rng.standard_normal((n_directions, d))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    thetas = np.concatenate([r * dirs for r in radii])
    return SamplingGrid(thetas, ys, {"radii": list(map(float, radii)), "n_directions": len(dirs),
                                     "n_y": len(np.atleast_2d(ys))})


def default_grid(d: int, stream: StationaryStream, rng: np.random.Generator,
                 radii=DEFAULT_RADII, n_directions: int = 64, n_y: int = 1000) -> SamplingGrid:
    """Radial theta grid and ``n_y`` consecutive draws of the stationary stream."""
    ys = stream.sample_path(rng, n_y)
    return radial_grid(d, ys, radii, n_directions, rng)


@dataclass(frozen=True)
class Violation:
    theta: tuple
    y: tuple
    lhs: float
    rhs: float
    note: str = ""


@dataclass
class AssumptionReport:
    assumption: str
    constants: dict
    grid: dict
    n_points: int
    n_violations: int
    violations: list

    @property
    def passed(self) -> bool:
        return self.n_violations == 0

    def to_dict(self) -> dict:
        return {"assumption": self.assumption, "passed": self.passed,
                "constants": self.constants, "grid": self.grid, "n_points": self.n_points,
                "n_violations": self.n_violations,
                "violations": [v.__dict__ for v in self.violations]}


def _b_values(b, grid: SamplingGrid) -> np.ndarray:
    if callable(b):
        vals = np.asarray(b(grid.ys), dtype=float).reshape(len(grid.ys))
    else:
        vals = np.asarray(b, dtype=float).reshape(len(grid.ys))
    if np.any(vals < 0):
        raise ValueError("b must be non-negative")
    return vals


def _describe(b):
    if hasattr(b, "to_dict"):
        return b.to_dict()
    return "tabulated" if not callable(b) else getattr(b, "__name__", repr(b))


def _scan(model, grid, lhs_fn, rhs_fn, name, constants):
    """Evaluate ``lhs >= rhs`` pairwise; ``lhs_fn``/``rhs_fn`` see (H, theta, y, y-index)."""
    ny = len(grid.ys)
    kept, count = [], 0
    for it, th, y in grid.pairs():
        yi = np.arange(len(th)) % ny
        with np.errstate(over="ignore", invalid="ignore"):
            H = model.func(th, y)
            finite = np.all(np.isfinite(H), axis=1)
            lhs = lhs_fn(H, th, y, yi)
            rhs = rhs_fn(H, th, y, yi)
        bad = ~finite | ~(lhs >= rhs)
        count += int(bad.sum())
        for k in np.flatnonzero(bad)[: max(0, _MAX_KEPT - len(kept))]:
            kept.append(Violation(tuple(th[k].tolist()), tuple(y[k].tolist()), float(lhs[k]),
                                  float(rhs[k]), "" if finite[k] else "non-finite H"))
    return AssumptionReport(name, constants, grid.description, grid.size, count, kept)


def check_dissipativity(model: UpdateModel, Delta: float, b, grid: SamplingGrid) -> AssumptionReport:
    """Test ``<H(theta, y), theta> >= Delta |theta|^2 - b(y)`` exactly at every pair.

    ``b`` is a callable on ``(n, m)`` arrays or an array of values at ``grid.ys``.
    """
    if not Delta > 0:
        raise ValueError("Delta must be positive")
    bv = _b_values(b, grid)
    return _scan(model, grid,
                 lambda H, th, y, yi: np.einsum("ij,ij->i", H, th),
                 lambda H, th, y, yi: Delta * np.einsum("ij,ij->i", th, th) - bv[yi],
                 "dissipativity", {"Delta": Delta, "b": _describe(b)})


def check_growth(model: UpdateModel, K1: float, K2: float, K3: float, beta: float,
                 grid: SamplingGrid) -> AssumptionReport:
    """Test ``|H(theta, y)| <= K1 |theta| + K2 |y|^beta + K3`` at every pair."""
    if beta < 1:
        raise ValueError("beta must be >= 1")
    if min(K1, K2, K3) < 0:
        raise ValueError("growth constants must be non-negative")
    yb = np.linalg.norm(grid.ys, axis=1) ** beta
    return _scan(model, grid,
                 lambda H, th, y, yi: K1 * np.linalg.norm(th, axis=1) + K2 * yb[yi] + K3,
                 lambda H, th, y, yi: np.linalg.norm(H, axis=1),
                 "growth", {"K1": K1, "K2": K2, "K3": K3, "beta": beta})


@dataclass
class ConstantsFit:
    """Fitted constants; ``None`` fields mean no certificate was found."""

    Delta: float | None = None
    b: Callable | None = None
    b_samples: np.ndarray | None = None
    K1: float | None = None
    K2: float | None = None
    K3: float | None = None
    beta: float | None = None
    dissipativity: AssumptionReport | None = None
    growth: AssumptionReport | None = None
    messages: list = field(default_factory=list)

    @property
    def dissipativity_found(self) -> bool:
        return self.Delta is not None

    @property
    def growth_found(self) -> bool:
        return self.K1 is not None

    @property
    def found(self) -> bool:
        return self.dissipativity_found and self.growth_found


def _pairwise(model, grid, fn):
    out = []
    for it, th, y in grid.pairs():
        with np.errstate(over="ignore", invalid="ignore"):
            out.append(fn(model.func(th, y), th, y))
    return np.concatenate(out)


def _fit_delta(model, grid, b, fit):
    ny = len(grid.ys)
    ip = _pairwise(model, grid, lambda H, th, y: np.einsum("ij,ij->i", H, th))
    r2 = np.repeat(np.einsum("ij,ij->i", grid.thetas, grid.thetas), ny)
    if not np.all(np.isfinite(ip)):
        fit.messages.append("no dissipativity certificate found: H is not finite on the grid")
        return
    nz = r2 > 0
    if b is not None:
        bv = np.tile(_b_values(b, grid), len(grid.thetas))
        ratio = (ip[nz] + bv[nz]) / r2[nz]
        best = ratio.min() if ratio.size else math.inf
        for D in DELTA_LOG_GRID[::-1]:
            if D > best:
                continue
            rep = check_dissipativity(model, float(D), b, grid)
            if rep.passed:
                fit.Delta, fit.b, fit.b_samples, fit.dissipativity = float(D), b, _b_values(b, grid), rep
                return
        fit.messages.append("no dissipativity certificate found for the supplied b")
        return
    # No candidate b: the envelope b(y) = max_theta (Delta|theta|^2 - <H,theta>)_+
    # must be attained away from the outermost radius, otherwise it is unbounded.
    rmax = r2.max()
    outer = (r2 >= rmax * (1 - 1e-12)).reshape(len(grid.thetas), ny)
    ipm = ip.reshape(len(grid.thetas), ny)
    r2m = r2.reshape(len(grid.thetas), ny)
    for D in DELTA_LOG_GRID[::-1]:
        deficit = D * r2m - ipm
        out_max = np.where(outer, deficit, -np.inf).max(axis=0)
        in_max = np.where(~outer, deficit, -np.inf).max(axis=0)
        if np.all((out_max <= 0) | (out_max < in_max)):
            slack = 1e-12 * (D * r2m + np.abs(ipm))
            env = np.maximum((deficit + slack).max(axis=0), 0.0)
            rep = check_dissipativity(model, float(D), env, grid)
            if rep.passed:
                fit.Delta, fit.b, fit.b_samples, fit.dissipativity = float(D), None, env, rep
                return
    fit.messages.append("no dissipativity certificate found: drift is not inward for large |theta|")


def _solve_lp(cost, a, c, h, K1_fixed):
    """min cost . K  s.t.  K1 a + K2 c + K3 >= h, K >= 0 (``K1`` optionally fixed)."""
    if K1_fixed is None:
        A = -np.column_stack([a, c, np.ones_like(a)])
        res = linprog(cost, A_ub=A, b_ub=-h, bounds=[(0, None)] * 3, method="highs")
        return None if res.status != 0 else tuple(float(v) for v in res.x)
    A = -np.column_stack([c, np.ones_like(c)])
    res = linprog(cost[1:], A_ub=A, b_ub=-(h - K1_fixed * a), bounds=[(0, None)] * 2,
                  method="highs")
    return None if res.status != 0 else (float(K1_fixed), float(res.x[0]), float(res.x[1]))


def _lp_growth(a, c, h, K1_fixed, rng, max_rows=4000, max_rounds=30):
    """Least-total-slack upper envelope, solved by constraint generation.

    Constraints start from the rows with the largest ``|H|`` plus a random
    subsample; the most violated rows are added until every row is covered.
    """
    n = len(h)
    cost = np.array([a.sum(), c.sum(), float(n)])
    if n <= max_rows:
        rows = np.arange(n)
    else:
        rows = np.unique(np.concatenate([np.argsort(h)[-max_rows // 2:],
                                         rng.choice(n, max_rows // 2, replace=False)]))
    tol = 1e-12 * (1.0 + np.abs(h).max())
    K = None
    for _ in range(max_rounds):
        K = _solve_lp(cost, a[rows], c[rows], h[rows], K1_fixed)
        if K is None:
            return None
        excess = h - (K[0] * a + K[1] * c + K[2])
        worst = np.flatnonzero(excess > tol)
        if not worst.size:
            break
        rows = np.union1d(rows, worst[np.argsort(excess[worst])[-max_rows:]])
    return K


def _covers(model, grid, K, beta, rel=0.05):
    K1, K2, K3 = K
    yb = np.linalg.norm(grid.ys, axis=1) ** beta
    ny = len(grid.ys)
    norms = _pairwise(model, grid, lambda H, th, y: np.linalg.norm(H, axis=1))
    bound = np.repeat(K1 * np.linalg.norm(grid.thetas, axis=1), ny) + np.tile(K2 * yb, len(grid.thetas)) + K3
    return bool(np.all(norms <= bound * (1 + rel) + rel))


def _norm_table(model, grid):
    ny = len(grid.ys)
    h = _pairwise(model, grid, lambda H, th, y: np.linalg.norm(H, axis=1))
    a = np.repeat(np.linalg.norm(grid.thetas, axis=1), ny)
    yn = np.tile(np.linalg.norm(grid.ys, axis=1), len(grid.thetas))
    return a, yn, h


def _fit_growth(model, grid, fit, rng, K1_fixed, betas, extrapolate):
    a, yn, h = _norm_table(model, grid)
    if not np.all(np.isfinite(h)):
        fit.messages.append("no growth certificate found: H is not finite on the grid")
        return
    fa, fy, fh = a, yn, h
    if extrapolate:
        # fit on the grid plus one decade further out; test two decades out
        for g in (grid.scaled(y_factor=extrapolate), grid.scaled(theta_factor=extrapolate)):
            ea, ey, eh = _norm_table(model, g)
            fa, fy, fh = np.concatenate([fa, ea]), np.concatenate([fy, ey]), np.concatenate([fh, eh])
        if not np.all(np.isfinite(fh)):
            fit.messages.append("no growth certificate found: H is not finite beyond the grid")
            return
    for beta in betas:
        K = _lp_growth(fa, fy ** beta, fh, K1_fixed, rng)
        if K is None:
            continue
        far = extrapolate ** 2 if extrapolate and len(betas) > 1 else None
        if far and not (_covers(model, grid.scaled(y_factor=far), K, beta)
                        and _covers(model, grid.scaled(theta_factor=far), K, beta)):
            continue
        K1, K2, K3 = K
        excess = h - (K1 * a + K2 * yn ** beta + K3)
        if excess.max() > 0:
            K3 += float(excess.max()) * (1 + 1e-9) + 1e-12
        rep = check_growth(model, K1, K2, K3, beta, grid)
        if rep.passed:
            fit.K1, fit.K2, fit.K3, fit.beta, fit.growth = K1, K2, K3, float(beta), rep
            return
    fit.messages.append("no growth certificate found: |H| is not of linear growth on the grid")


def fit_constants(model: UpdateModel, grid: SamplingGrid, rng: np.random.Generator | None = None,
                  b=None, K1=None, betas=BETA_CANDIDATES, extrapolate: float = 10.0) -> ConstantsFit:
    """Estimate ``Delta`` and ``(K1, K2, K3, beta)`` on a grid.

    ``Delta`` is the largest value of :data:`DELTA_LOG_GRID` for which the
    dissipativity inequality holds with ``b`` (default: the model's declared
    ``b``; without one, the pointwise envelope is used and must stay bounded at
    the outermost radius). Growth constants come from a linear program that
    minimises the total slack of ``K1|theta| + K2|y|^beta + K3 >= |H|``; the
    program is solved on the grid and on copies with ``y`` (resp. ``theta``)
    scaled by ``extrapolate``; the smallest ``beta`` whose fit still covers
    copies scaled by ``extrapolate**2`` up to 5% is kept (a single candidate
    is accepted without that test). Every reported constant has
    passed :func:`check_dissipativity` / :func:`check_growth` on ``grid``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    if b is None and model.constants is not None:
        b = model.constants.b
    fit = ConstantsFit()
    _fit_delta(model, grid, b, fit)
    _fit_growth(model, grid, fit, rng, K1, betas, extrapolate)
    return fit
