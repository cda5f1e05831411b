import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgld_stream import (AR1Stream, ChainConfig, IIDGaussianStream, MLPSpec, NoiseModel,
                         ZeroStream, ensemble_moments, histogram_tv, linear_chain_oracle,
                         linear_model, projected_tv, run_ensemble, two_start_decay,
                         untamed_mlp_model)
from sgld_stream.convergence import derive_seed
from sgld_stream.models import zero_model


def test_tv_identical_and_disjoint():
    x = np.random.default_rng(0).standard_normal(1000)
    assert histogram_tv(x, x).value == 0.0
    rng = np.random.default_rng(1)
    a, b = rng.uniform(0, 1, 500), rng.uniform(2, 3, 500)
    assert histogram_tv(a, b, range=(0, 3)).value == 1.0


def test_tv_counts_overflow():
    a = np.array([-100.0, 0.1, 0.2, 0.3])
    b = np.array([0.1, 0.2, 0.3, 0.4])
    est = histogram_tv(a, b, bins=4, range=(0, 1))
    assert est.countsA[0] == 1 and est.countsA.sum() == 4
    assert est.value == pytest.approx(0.25)


def test_tv_same_normal_calibration():
    rng = np.random.default_rng(2)
    vals = [histogram_tv(rng.standard_normal(10**5), rng.standard_normal(10**5)).value
            for _ in range(20)]
    assert max(vals) < 0.02
    # Poisson approximation of the expected binned TV between two same-law samples
    est = histogram_tv(rng.standard_normal(10**5), rng.standard_normal(10**5))
    p = est.countsA / 10**5
    expected = 0.5 * np.sum(np.sqrt(4 * p / (math.pi * 10**5)))
    assert abs(np.mean(vals) - expected) < 0.3 * expected


def test_tv_detects_shift():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal(10**5), rng.standard_normal(10**5) + 1.0
    exact = 2 * (0.5 * (1 + math.erf(0.5 / math.sqrt(2)))) - 1
    assert abs(histogram_tv(a, b).value - exact) < 0.02


def test_projected_tv_multivariate():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((20000, 3))
    B = rng.standard_normal((20000, 3))
    B[:, 0] += 10.0
    assert projected_tv(A, B).value > 0.99
    with pytest.raises(ValueError):
        histogram_tv(A, B)


def test_oracle_trivial_cases():
    mean, var = linear_chain_oracle(0.1, 0.5, 0, 3.0)
    assert mean.tolist() == [3.0] and var.tolist() == [0.0]
    _, var = linear_chain_oracle(1.0, 0.0, 5, 0.0)
    np.testing.assert_allclose(var[1:], 2.0)
    _, var = linear_chain_oracle(0.1, 0.0, 2000, 0.0)
    assert var[-1] == pytest.approx(0.11 / 0.19, rel=1e-12)


@given(st.floats(0.01, 1.0), st.floats(-0.95, 0.95), st.integers(1, 30))
@settings(max_examples=30, deadline=None)
def test_oracle_matches_explicit_gaussian_covariance(lam, rho, T):
    """theta_T is linear in (Y_0..Y_{T-1}, xi_1..xi_T); compute its variance directly."""
    a = 1 - lam
    cy = np.array([lam * a ** (T - 1 - s) for s in range(T)])
    cx = np.array([math.sqrt(lam) * a ** (T - 1 - s) for s in range(T)])
    idx = np.arange(T)
    Sigma_y = rho ** np.abs(idx[:, None] - idx[None, :])
    exact = cy @ Sigma_y @ cy + cx @ cx
    mean, var = linear_chain_oracle(lam, rho, T, 2.0)
    assert var[-1] == pytest.approx(exact, rel=1e-10, abs=1e-14)
    assert mean[-1] == pytest.approx(2.0 * a ** T)


def test_oracle_rejects_bad_args():
    with pytest.raises(ValueError):
        linear_chain_oracle(0.1, 1.0, 5, 0.0)
    with pytest.raises(ValueError):
        linear_chain_oracle(1.5, 0.0, 5, 0.0)


def test_ensemble_moments():
    res = run_ensemble(zero_model(1), ZeroStream(), NoiseModel.zero(1),
                       ChainConfig(0.1, 3, [2.0]), 10)
    m = ensemble_moments(res)
    assert m[-1].cov[0, 0] == 0.0 and m[-1].mean[0] == 2.0
    res = run_ensemble(zero_model(1), ZeroStream(), NoiseModel.gaussian(1),
                       ChainConfig(1.0, 3, [0.0], seed=5), 10**4)
    v = ensemble_moments(res)[-1].cov[0, 0]
    assert abs(v - 3) < 3 * 3 * math.sqrt(2 / 10**4)


def test_ensemble_moments_too_few_chains():
    res = run_ensemble(linear_model(), ZeroStream(), NoiseModel.gaussian(1),
                       ChainConfig(0.1, 3, [0.0]), 1)
    assert ensemble_moments(res) == [None, None]


def test_same_start_is_at_noise_floor():
    rep = two_start_decay(linear_model(), AR1Stream(0.5), NoiseModel.gaussian(1), 0.1, [1.0], [1.0],
                          (0, 10, 50), 5000, seed=6)
    assert rep.tv[0] == 0.0
    assert np.all(rep.tv[1:] < 4 * np.maximum(rep.floor[1:], 0.01))


def test_untamed_divergence_reported():
    spec = MLPSpec((2, 3, 1), eta=1.0, lam=0.01)
    rng = np.random.default_rng(7)
    far = rng.standard_normal(spec.d)
    far *= 50 / np.linalg.norm(far)
    from sgld_stream import BoundedStream
    rep = two_start_decay(untamed_mlp_model(spec), BoundedStream(IIDGaussianStream(spec.m)),
                          NoiseModel.gaussian(spec.d), 0.01, np.zeros(spec.d), far,
                          (0, 20), 50, seed=8, noise_floor=False)
    assert rep.diverged["B"] == 50 and rep.tv[-1] == 1.0


def test_derive_seed_is_stable():
    assert derive_seed(1, 0) == derive_seed(1, 0) != derive_seed(1, 1)
