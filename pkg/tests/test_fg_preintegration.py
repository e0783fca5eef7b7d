import numpy as np
import pytest

from conftest import numeric_jacobian, random_nav
from src.common.models import ImuSample
from src.ekf.filter import transition
from src.fg.preintegration import EmptySegmentError, preintegrate, preintegration_residual, segment
from src.measurement.schemas import ProcessNoise


def _samples(rng, n=40, rate=200.0, t0=0.0):
    return [
        ImuSample(t=t0 + k / rate, accel=rng.normal(size=3) + [0.0, 0.0, 9.81], gyro=0.3 * rng.normal(size=3))
        for k in range(n)
    ]


def test_segment_covers_the_interval(rng):
    samples = _samples(rng, n=10)
    steps = segment(samples, 0.012, 0.031)
    assert sum(dt for _, dt in steps) == pytest.approx(0.019)
    assert steps[0][0] is samples[2], "The sample active at t_start drives the first step"


def test_empty_segment_raises(rng):
    samples = _samples(rng, n=5, t0=10.0)
    with pytest.raises(EmptySegmentError):
        preintegrate(samples, 0.0, 1.0, np.zeros(3), np.zeros(3), ProcessNoise())


def test_prediction_equals_step_by_step_propagation(rng):
    # Arrange
    samples = _samples(rng)
    nav = random_nav(rng)
    t_end = samples[-1].t + 1 / 200.0

    # Act
    pim = preintegrate(samples, 0.0, t_end, nav.ba, nav.bg, ProcessNoise())
    propagated = nav
    for sample in samples:
        propagated, _ = transition(propagated, sample, 1 / 200.0)

    # Assert
    predicted = pim.predict(nav)
    assert np.allclose(predicted.p, propagated.p, atol=1e-9)
    assert np.allclose(predicted.v, propagated.v, atol=1e-9)
    assert np.linalg.norm(predicted.q.boxminus(propagated.q)) < 1e-9


def test_residual_vanishes_on_prediction(rng):
    samples = _samples(rng)
    nav = random_nav(rng)
    pim = preintegrate(samples, 0.0, 0.2, nav.ba, nav.bg, ProcessNoise())
    r, _, _ = preintegration_residual(pim, nav, pim.predict(nav))
    assert np.allclose(r, 0.0, atol=1e-9)


def test_bias_correction_is_first_order(rng):
    samples = _samples(rng)
    ba, bg = np.zeros(3), np.zeros(3)
    pim = preintegrate(samples, 0.0, 0.2, ba, bg, ProcessNoise())
    dba, dbg = 1e-4 * rng.normal(size=3), 1e-4 * rng.normal(size=3)

    exact = preintegrate(samples, 0.0, 0.2, ba + dba, bg + dbg, ProcessNoise())
    dp, drot, dv = pim.corrected(ba + dba, bg + dbg)

    assert np.allclose(dp, exact.delta_p, atol=1e-8)
    assert np.allclose(dv, exact.delta_v, atol=1e-8)
    assert np.allclose(drot, exact.delta_rot, atol=1e-8)


def test_residual_jacobians_match_numeric(rng):
    # Arrange: states away from the prediction and biases away from the linearization point
    samples = _samples(rng)
    xi = random_nav(rng)
    pim = preintegrate(samples, 0.0, 0.2, xi.ba + 0.01, xi.bg - 0.002, ProcessNoise())
    xj = pim.predict(xi).boxplus(0.05 * rng.normal(size=15))

    # Act
    _, ji, jj = preintegration_residual(pim, xi, xj)

    # Assert
    num_i = numeric_jacobian(lambda x: preintegration_residual(pim, x, xj)[0], xi)
    num_j = numeric_jacobian(lambda x: preintegration_residual(pim, xi, x)[0], xj)
    assert np.allclose(ji, num_i, atol=1e-5), f"max deviation {np.abs(ji - num_i).max()}"
    assert np.allclose(jj, num_j, atol=1e-5), f"max deviation {np.abs(jj - num_j).max()}"


def test_covariance_is_positive_and_grows(rng):
    samples = _samples(rng)
    short = preintegrate(samples, 0.0, 0.05, np.zeros(3), np.zeros(3), ProcessNoise())
    long = preintegrate(samples, 0.0, 0.2, np.zeros(3), np.zeros(3), ProcessNoise())
    assert np.linalg.eigvalsh(short.covariance).min() > 0
    assert np.trace(long.covariance) > np.trace(short.covariance)
    assert short.dt == pytest.approx(0.05)
