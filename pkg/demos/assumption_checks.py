"""Check dissipativity and linear growth on sampled grids, and fit constants.

The linear model passes with its exact constants. Pushing Delta above 1/2
produces a violation, the anti-dissipative drift admits no certificate, and
the tamed network fits a growth bound with the prescribed K1 = eta/sqrt(lam).
"""
import math

import numpy as np

from sgld_stream import (AR1Stream, MLPSpec, check_dissipativity, check_growth, default_grid,
                         fit_constants, linear_model, radial_grid, tamed_mlp_model,
                         untamed_mlp_model)
from sgld_stream.models import PowerB, anti_dissipative_model

rng = np.random.default_rng(0)
grid = default_grid(1, AR1Stream(0.9), rng, n_y=200)
b = PowerB(0.5, 2.0, 0.0)

print("linear, Delta=0.5:", check_dissipativity(linear_model(), 0.5, b, grid).passed)
bad = check_dissipativity(linear_model(), 0.9, b, grid)
print(f"linear, Delta=0.9: {bad.n_violations} violations, first at theta={bad.violations[0].theta}")
print("linear growth (1, 1, 0, 1):", check_growth(linear_model(), 1, 1, 0, 1, grid).passed)

fit = fit_constants(linear_model(), grid, rng)
print(f"fitted: Delta={fit.Delta:.4f} K1={fit.K1:.4f} K2={fit.K2:.4f} K3={fit.K3:.4f} "
      f"beta={fit.beta}")
anti = fit_constants(anti_dissipative_model(), grid, rng)
print("anti-dissipative:", anti.messages[0])

spec = MLPSpec((4, 8, 8, 2), eta=1.0, lam=0.01)
ys = rng.standard_normal((30, spec.m))
net_grid = radial_grid(spec.d, ys, n_directions=32, rng=rng)
K1 = spec.eta / math.sqrt(spec.lam)
tamed = fit_constants(tamed_mlp_model(spec), net_grid, rng, K1=K1, betas=(2.0,))
print(f"tamed network: K1={tamed.K1:g} K2={tamed.K2:.4g} K3={tamed.K3:.4g} beta={tamed.beta}")
print("untamed network growth certificate found:",
      fit_constants(untamed_mlp_model(spec), net_grid, rng).growth_found)
