"""Stochastic gradient Langevin dynamics with dependent data streams.

The chain ``theta_{t+1} = theta_t - lam H(theta_t, Y_t) + sqrt(lam) xi_{t+1}``
is driven by a stationary, possibly dependent, data process ``Y``. Besides
simulation, the package evaluates the dissipativity / growth conditions, the
Lyapunov drift and minorization certificates that make the chain law converge
in total variation, and measures that convergence empirically.
"""
from .assumptions import (AssumptionReport, SamplingGrid, check_dissipativity, check_growth,
                          default_grid, fit_constants, radial_grid)
from .chain import (ChainConfig, ConfigurationError, DivergenceError, EnsembleResult,
                    Trajectory, run_chain, run_ensemble, step)
from .convergence import (TVEstimate, ensemble_moments, histogram_tv, linear_chain_oracle,
                          projected_tv, two_start_decay)
from .diagnostics import (Ball, DriftCertificate, EmptySet, HalfBall, MinorizationCertificate,
                          MomentBound, StepSizeError, compose_drift, drift_constants,
                          minorization_cert, moment_bound, verify_drift_mc,
                          verify_minorization_mc)
from .models import (MLPSpec, PowerB, RegressionSpec, UpdateModel, finite_diff_grad,
                     linear_H, linear_model, regression_H, regression_model, tamed_mlp_H,
                     tamed_mlp_model, untamed_mlp_H, untamed_mlp_model)
from .noise import NoiseModel, UnsupportedNoiseError
from .streams import (AR1Stream, BoundedStream, IIDGaussianStream, RegressionStream,
                      StationaryStream, ZeroStream, estimate_moments)

__version__ = "0.1.0"
