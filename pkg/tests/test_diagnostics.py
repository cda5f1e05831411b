import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sgld_stream import (Ball, EmptySet, HalfBall, NoiseModel, StepSizeError, compose_drift,
                         drift_constants, linear_model, minorization_cert, moment_bound,
                         verify_drift_mc, verify_minorization_mc)
from sgld_stream.diagnostics import ball_volume, drift_threshold
from sgld_stream.models import PowerB

B = PowerB(0.5, 2.0, 0.0)


def cert(lam=0.1, sigma2=1.0, Delta=0.5, K1=1.0):
    return drift_constants(Delta, K1, 1.0, 0.0, 1.0, B, sigma2, lam)


def test_gamma_and_K_hand_values():
    c = cert()
    assert c.gamma == 1 - 0.1 + 0.03
    assert abs(c.gamma - 0.93) <= 1e-15
    assert abs(float(c.K([1.0])) - 0.23) <= 1e-15


def test_small_step_limit():
    c = cert(lam=1e-9)
    assert c.gamma == pytest.approx(1.0, abs=1e-8)
    assert float(c.K([2.0])) == pytest.approx(0.0, abs=1e-7)


def test_step_size_threshold():
    assert drift_threshold(0.5, 1.0) == pytest.approx(1 / 3)
    with pytest.raises(StepSizeError, match="2\\*Delta/\\(3\\*K1\\^2\\)"):
        cert(lam=0.34)


def test_zero_state_equality():
    c = cert()
    rep = verify_drift_mc(linear_model(), NoiseModel.gaussian(1), 0.1, c, [[0.0]], [[0.0]], 10**5,
                          np.random.default_rng(0))
    p = rep.points[0]
    assert p.rhs == pytest.approx(0.1)
    assert abs(p.lhs - 0.1) < 4 * p.se and rep.passed


def test_noiseless_contraction():
    c = drift_constants(1.0, 1.0, 1.0, 0.0, 1.0, B, 0.0, 0.1)
    for th in (-3.0, 0.5, 7.0):
        assert (1 - 0.1) ** 2 * th * th <= c.gamma * th * th
    rep = verify_drift_mc(linear_model(), NoiseModel.zero(1), 0.1, c, [[-3.0], [7.0]], [[0.0]],
                          1000, np.random.default_rng(0))
    assert rep.passed


def test_drift_mc_small_grid():
    grid_t = np.arange(-5, 6, 2.5)[:, None]
    grid_y = np.arange(-3, 4, 3.0)[:, None]
    rep = verify_drift_mc(linear_model(), NoiseModel.gaussian(1), 0.1, cert(), grid_t, grid_y,
                          20000, np.random.default_rng(1))
    assert rep.passed and len(rep.points) == 15


def test_drift_mc_detects_wrong_certificate():
    bad = drift_constants(0.5, 1.0, 1.0, 0.0, 1.0, B, 0.0, 0.1)  # noise variance omitted
    rep = verify_drift_mc(linear_model(), NoiseModel.gaussian(1), 0.1, bad, [[0.0]], [[0.0]],
                          10**4, np.random.default_rng(2))
    assert not rep.passed


def test_drift_mc_needs_enough_samples():
    with pytest.raises(ValueError):
        verify_drift_mc(linear_model(), NoiseModel.gaussian(1), 0.1, cert(), [[0.0]], [[0.0]], 10,
                        np.random.default_rng(0))


def test_compose():
    c = cert()
    assert compose_drift(c, [1.0], [[1.0]]) == pytest.approx(c.gamma + float(c.K([1.0])))
    zero_k = drift_constants(0.5, 1.0, 0.0, 0.0, 1.0, PowerB(0, 2, 0), 0.0, 0.1)
    assert compose_drift(zero_k, [2.0], np.zeros((5, 1))) == pytest.approx(4 * zero_k.gamma ** 5)
    assert compose_drift(c, [1.0], [[1.0], [1.0]]) == pytest.approx(0.8649 + 0.23 * 1.93, rel=1e-14)
    assert 0.8649 + 0.23 * 1.93 == pytest.approx(1.3088)


@given(st.lists(st.floats(-4, 4), min_size=1, max_size=6), st.floats(-5, 5))
@settings(max_examples=50)
def test_compose_matches_iterated_bound(ys, th):
    c = cert()
    # iterate the one-step bound, applying y_k first and y_1 last
    v = th * th
    for y in reversed(ys):
        v = c.gamma * v + float(c.K([y]))
    assert compose_drift(c, [th], [[y] for y in ys]) == pytest.approx(v, rel=1e-12)


def test_moment_bound_hand_value():
    mb = moment_bound([0.0], cert(), 0.5, 1.0)
    assert mb.value == pytest.approx(0.93 / 0.07 * 5, rel=1e-13)
    assert mb.value == pytest.approx(66.43, abs=0.01)
    assert mb.tail_bound(100.0) == pytest.approx(mb.value / 1e4)
    assert mb.tail_bound(0.1) == 1.0


def test_moment_bound_gamma_to_zero():
    K1 = (1 + 1e-6) / math.sqrt(3)
    c = drift_constants(1.0, K1, 1.0, 0.0, 1.0, B, 1.0, 1.0 / (3 * K1 * K1))
    assert c.gamma < 1e-5
    mb = moment_bound([3.0], c, 0.5, 1.0)
    assert mb.value == pytest.approx(9.0, abs=0.1)


def test_minorization_hand_values():
    mc = minorization_cert(1, 1, 0, 1, 0.25, NoiseModel.gaussian(1), 1)
    assert mc.R == 5.0
    assert mc.C == pytest.approx(stats.norm.pdf(5.0), rel=1e-13)
    assert mc.alpha == pytest.approx(stats.norm.pdf(5.0) * 2 / 0.5, rel=1e-12)
    assert abs(mc.alpha - 5.95e-6) < 0.01e-6
    assert not mc.clamped


def test_minorization_monotone_in_n():
    noise = NoiseModel.gaussian(2)
    a, b = (minorization_cert(1, 1, 0, 1, 0.1, noise, n) for n in (1, 2))
    assert b.R > a.R and b.C < a.C


def test_minorization_log_space():
    tiny = minorization_cert(1, 1, 1, 1, 0.01, NoiseModel.gaussian(5), 10)
    assert tiny.alpha == 0.0 and np.isfinite(tiny.log_alpha) and not tiny.clamped


def test_minorization_rejects_zero_noise():
    with pytest.raises(ValueError):
        minorization_cert(1, 1, 0, 1, 0.25, NoiseModel.zero(1), 1)


def test_ball_volume():
    assert ball_volume(1, 1.0) == pytest.approx(2.0)
    assert ball_volume(2, 1.0) == pytest.approx(math.pi)
    assert ball_volume(3, 2.0) == pytest.approx(4 / 3 * math.pi * 8)


def test_minorization_test_sets():
    mc = minorization_cert(1, 1, 0, 1, 0.25, NoiseModel.gaussian(1), 1)
    assert mc.nu(Ball((0.0,), 1.0)) == 1.0
    assert mc.nu(HalfBall(1.0)) == 0.5
    assert mc.nu(EmptySet()) == 0.0
    chk = verify_minorization_mc(linear_model(), NoiseModel.gaussian(1), mc, [0.0], [0.0],
                                 EmptySet(), 1000, np.random.default_rng(0))
    assert chk.q_hat == 0.0 and chk.lower == 0.0 and chk.passed


def test_minorization_mc_half_interval():
    mc = minorization_cert(1, 1, 0, 1, 0.25, NoiseModel.gaussian(1), 1)
    chk = verify_minorization_mc(linear_model(), NoiseModel.gaussian(1), mc, [0.0], [0.0],
                                 HalfBall(1.0), 10**5, np.random.default_rng(3))
    exact = stats.norm.cdf(2) - 0.5
    assert exact == pytest.approx(0.4772, abs=1e-4)
    assert abs(chk.q_hat - exact) < 4 * chk.se
    assert chk.lower == pytest.approx(mc.alpha * 0.5) and chk.passed


def test_minorization_mc_rejects_points_outside_ball():
    mc = minorization_cert(1, 1, 0, 1, 0.25, NoiseModel.gaussian(1), 1)
    with pytest.raises(ValueError):
        verify_minorization_mc(linear_model(), NoiseModel.gaussian(1), mc, [2.0], [0.0],
                               HalfBall(1.0), 100, np.random.default_rng(0))
