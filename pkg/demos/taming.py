"""A three-layer network started far from the origin.

Plain SGLD with the raw gradient overflows within a few steps because the
regulariser grows like |theta|^{2r+1}. Dividing by 1 + sqrt(lam)|theta|^{2r}
keeps every chain finite and pulls it back to a bounded region.
"""
import numpy as np

from sgld_stream import (ChainConfig, MLPSpec, NoiseModel, RegressionStream, run_ensemble,
                         tamed_mlp_model, untamed_mlp_model)

spec = MLPSpec((4, 8, 8, 2), eta=1.0, lam=0.01)
rng = np.random.default_rng(4)
u = rng.standard_normal(spec.d)
theta0 = 50.0 * u / np.linalg.norm(u)
data = RegressionStream(rng.uniform(-0.5, 0.5, (2, 4)), np.zeros(2), rho=0.5, label_sd=0.1)
noise = NoiseModel.gaussian(spec.d)

cps = (0, 10, 100, 1000, 10_000)
tamed = run_ensemble(tamed_mlp_model(spec), data, noise, ChainConfig(0.01, 10_000, theta0, 5, cps), 100)
for t, snap in zip(tamed.times, tamed.snapshots):
    print(f"tamed   t={t:6d} mean |theta|^2 = {(snap ** 2).sum(axis=1).mean():10.2f}")
print(f"tamed divergences: {tamed.n_diverged}/100")

untamed = run_ensemble(untamed_mlp_model(spec), data, noise, ChainConfig(0.01, 1000, theta0, 6), 100)
print(f"untamed divergences: {untamed.n_diverged}/100, first at step {untamed.diverged_at.min()}")
