import math

import numpy as np
import pytest

from sgld_stream import (AR1Stream, ChainConfig, ConfigurationError, DivergenceError,
                         IIDGaussianStream, NoiseModel, UpdateModel, ZeroStream, linear_model,
                         run_chain, run_ensemble, step)
from sgld_stream.chain import chain_generators
from sgld_stream.models import anti_dissipative_model, zero_model

identity = UpdateModel(1, 1, lambda th, y: th, name="identity")


@pytest.mark.parametrize("xi, expected", [(0.0, 0.96), (0.5, 1.06)])
def test_step_hand_values(xi, expected):
    assert step([1.0], [0.0], [xi], 0.04, identity)[0] == pytest.approx(expected, rel=1e-15)


def test_step_identity_case():
    v = np.array([0.3, -1.2])
    np.testing.assert_array_equal(step(np.zeros(2), [0.0], v, 1.0, zero_model(2)), v)


def test_step_rejects_bad_shapes_and_non_finite_H():
    with pytest.raises(ConfigurationError):
        step([1.0, 2.0], [0.0], [0.0], 0.1, identity)
    boom = UpdateModel(1, 1, lambda th, y: np.full_like(th, np.inf))
    with pytest.raises(DivergenceError):
        step([1.0], [0.0], [0.0], 0.1, boom)


@pytest.mark.parametrize("kw", [dict(lam=0.0), dict(lam=1.5), dict(horizon=-1),
                                dict(theta0=[np.nan]), dict(checkpoints=(5, 3)),
                                dict(checkpoints=(0, 20)), dict(seed=-1)])
def test_config_validation(kw):
    base = dict(lam=0.1, horizon=10, theta0=[0.0])
    with pytest.raises(ConfigurationError):
        ChainConfig(**{**base, **kw})


def test_zero_horizon():
    tr = run_chain(linear_model(), AR1Stream(0.5), NoiseModel.gaussian(1), ChainConfig(0.1, 0, [3.0]))
    np.testing.assert_array_equal(tr.times, [0])
    np.testing.assert_array_equal(tr.states, [[3.0]])


def test_fixed_point_without_noise():
    cfg = ChainConfig(0.5, 50, [1.0, -2.0], checkpoints=range(0, 51, 10))
    tr = run_chain(zero_model(2), ZeroStream(1), NoiseModel.zero(2), cfg)
    assert np.all(tr.states == [1.0, -2.0])


def test_dimension_mismatch():
    with pytest.raises(ConfigurationError):
        run_chain(linear_model(2), AR1Stream(0.0), NoiseModel.gaussian(2),
                  ChainConfig(0.1, 5, [0.0, 0.0]))


def test_ensemble_matches_sequential_reference():
    """Vectorised block simulation reproduces a plain per-chain loop."""
    model, stream, noise = linear_model(2), AR1Stream(0.7, 2), NoiseModel.laplace(2, 0.5)
    cfg = ChainConfig(0.2, 37, [1.0, -1.0], seed=99, checkpoints=(0, 1, 10, 37))
    res = run_ensemble(model, stream, noise, cfg, 5)
    for i in range(5):
        srng, nrng = chain_generators(99, i)
        state = stream.stationary_init(srng)
        theta, got = cfg.theta0.copy(), {0: cfg.theta0.copy()}
        for t in range(cfg.horizon):
            y, state = stream.next(srng, state)
            theta = step(theta, y, noise.sample(nrng), cfg.lam, model)
            got[t + 1] = theta
        for k, t in enumerate(cfg.checkpoints):
            np.testing.assert_allclose(res.snapshots[k, i], got[t], rtol=1e-13, atol=1e-13)


def test_singleton_ensemble_equals_run_chain():
    cfg = ChainConfig(0.1, 20, [0.5], seed=4, checkpoints=(0, 5, 20))
    args = (linear_model(), AR1Stream(0.3), NoiseModel.gaussian(1))
    np.testing.assert_array_equal(run_ensemble(*args, cfg, 1).snapshots[:, 0], run_chain(*args, cfg).states)


def test_determinism_and_thread_invariance():
    cfg = ChainConfig(0.1, 300, [0.0], seed=12345, checkpoints=(0, 100, 300))
    args = (linear_model(), AR1Stream(0.9), NoiseModel.gaussian(1), cfg, 2000)
    a = run_ensemble(*args)
    b = run_ensemble(*args)
    c = run_ensemble(*args, threads=4)
    assert a.snapshots.tobytes() == b.snapshots.tobytes() == c.snapshots.tobytes()


def test_chains_use_independent_streams():
    cfg = ChainConfig(0.1, 10, [0.0], seed=1)
    res = run_ensemble(linear_model(), IIDGaussianStream(), NoiseModel.gaussian(1), cfg, 3)
    last = res.at(10)[:, 0]
    assert len(set(last.tolist())) == 3


def test_one_euler_step_variance():
    cfg = ChainConfig(1.0, 1, [0.0, 0.0], seed=7)
    res = run_ensemble(zero_model(2), ZeroStream(), NoiseModel.gaussian(2), cfg, 10**4)
    x = res.at(1)
    se = math.sqrt(2 / (10**4 - 1))
    assert np.all(np.abs(x.var(axis=0, ddof=1) - 1) < 3 * se)


def test_stationary_variance_linear_iid():
    cfg = ChainConfig(0.1, 200, [0.0], seed=8)
    res = run_ensemble(linear_model(), IIDGaussianStream(), NoiseModel.gaussian(1), cfg, 10**4)
    v = res.at(200)[:, 0].var(ddof=1)
    target = (0.1 ** 2 + 0.1) / (1 - 0.9 ** 2)
    assert target == pytest.approx(0.5789, abs=1e-4)
    assert abs(v - target) < 3 * target * math.sqrt(2 / 10**4)


def test_divergence_is_recorded():
    cfg = ChainConfig(1.0, 200, [1.0], seed=3, checkpoints=(0, 10, 200))
    res = run_ensemble(anti_dissipative_model(), ZeroStream(), NoiseModel.gaussian(1), cfg, 20)
    assert res.n_diverged == 20
    assert np.all(res.diverged_at > 0)
    assert np.all(np.isnan(res.at(200)))
    tr = res.trajectory(0)
    assert tr.diverged_at is not None and np.all(tr.times < tr.diverged_at)


def test_checkpoint_lookup():
    res = run_ensemble(linear_model(), ZeroStream(), NoiseModel.zero(1),
                       ChainConfig(0.1, 4, [1.0], checkpoints=(0, 2, 4)), 1)
    assert res.at(2)[0, 0] == pytest.approx(0.81)
    with pytest.raises(KeyError):
        res.at(3)
