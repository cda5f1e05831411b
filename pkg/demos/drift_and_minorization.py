"""Build the drift and minorization certificates for the linear benchmark and
test both by Monte Carlo."""
import numpy as np

from sgld_stream import (Ball, HalfBall, NoiseModel, StepSizeError, drift_constants, linear_model,
                         minorization_cert, moment_bound, verify_drift_mc, verify_minorization_mc)
from sgld_stream.models import PowerB

noise = NoiseModel.gaussian(1)
b = PowerB(0.5, 2.0, 0.0)
cert = drift_constants(0.5, 1.0, 1.0, 0.0, 1.0, b, noise.sigma2, lam=0.1)
print(f"gamma = {cert.gamma}, K(1) = {float(cert.K([1.0]))}")

rep = verify_drift_mc(linear_model(), noise, 0.1, cert, np.arange(-5.0, 6.0)[:, None],
                      np.arange(-3.0, 4.0)[:, None], 10**5, np.random.default_rng(1))
print(f"drift inequality on 77 grid points: {len(rep.violations)} violations")

mb = moment_bound([0.0], cert, M_b=0.5, M_y=1.0)
print(f"sup_t E|theta_t|^2 <= {mb.value:.2f}; P(|theta_t| > 20) <= {mb.tail_bound(20):.3f}")

try:
    drift_constants(0.5, 1.0, 1.0, 0.0, 1.0, b, 1.0, lam=0.5)
except StepSizeError as exc:
    print("lam = 0.5 rejected:", exc)

mc = minorization_cert(1.0, 1.0, 0.0, 1.0, 0.25, noise, n=1)
print(f"R(1) = {mc.R}, C(1) = {mc.C:.4e}, alpha_1 = {mc.alpha:.4e}")
rng = np.random.default_rng(2)
for A in (Ball((0.0,), 1.0), HalfBall(1.0)):
    chk = verify_minorization_mc(linear_model(), noise, mc, [1.0], [-1.0], A, 10**6, rng)
    print(f"  {type(A).__name__}: P(theta' in A) = {chk.q_hat:.4f} >= {chk.lower:.2e}")
