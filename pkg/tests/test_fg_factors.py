import numpy as np
import pytest

from conftest import numeric_jacobian, random_nav
from src.common.models import ImuSample
from src.fg.factors import (
    DistanceFactor,
    DopplerFactor,
    LandmarkFactor,
    LinearFactor,
    PointObservationFactor,
    PreintegrationFactor,
    PriorFactor,
    dcs_cost,
    dcs_weight,
    landmark_key,
    state_key,
)
from src.fg.preintegration import preintegrate, preintegration_residual
from src.geom.transforms import Pose, Rotation
from src.measurement.models import directions_of, inverse_observation, spherical_covariance
from src.measurement.schemas import ExtrinsicsConfig, ProcessNoise

X0, X1 = state_key(0), state_key(1)


def _extrinsics(rng) -> Pose:
    base = ExtrinsicsConfig().pose()
    return Pose(Rotation.from_rotvec(0.1 * rng.normal(size=3)) * base.rotation, base.p, base.target, base.source)


def _check_jacobians(factor, values, atol=1e-6):
    _, jac = factor.linearize(values)
    for key in factor.keys:
        def residual(x, key=key):
            return factor.linearize({**values, key: x})[0]

        numeric = numeric_jacobian(residual, values[key])
        assert np.allclose(jac[key], numeric, atol=atol), f"{factor.kind} Jacobian for {key} off by " \
                                                          f"{np.abs(jac[key] - numeric).max()}"


def test_dcs_weight_values():
    assert dcs_weight(0.5, 1.0) == pytest.approx(1.0), "Inliers keep full weight"
    assert dcs_weight(3.0, 1.0) == pytest.approx(0.5)
    assert np.allclose(dcs_weight(np.array([0.0, 3.0]), 1.0), [1.0, 0.5])
    with pytest.raises(ValueError):
        dcs_weight(1.0, 0.0)


def test_dcs_cost_is_quadratic_for_inliers_and_bounded_for_outliers():
    assert dcs_cost(0.8, 1.0) == pytest.approx(0.8)
    assert dcs_cost(1e6, 1.0) < 4.0, "An outlier contributes a bounded cost"


def test_doppler_factor_jacobian(rng):
    dirs = directions_of(rng.normal(size=(6, 3)) + [3.0, 0.0, 0.0])
    factor = DopplerFactor(X0, dirs, rng.normal(size=6), 0.3 * rng.normal(size=3), 0.1, _extrinsics(rng))
    _check_jacobians(factor, {X0: random_nav(rng)})
    assert len(factor) == 6 and factor.keys == (X0,)


def test_doppler_residual_is_zero_at_prediction(rng):
    nav = random_nav(rng)
    dirs = directions_of(rng.normal(size=(4, 3)))
    factor = DopplerFactor(X0, dirs, np.zeros(4), np.zeros(3), 0.1, _extrinsics(rng))
    exact = DopplerFactor(X0, dirs, factor.predict({X0: nav}), np.zeros(3), 0.1, factor.extrinsics)
    assert np.allclose(exact.error({X0: nav}), 0.0)


def test_distance_factor_jacobian(rng):
    points = rng.normal(size=(5, 3)) + [4.0, 0.0, 0.0]
    factor = DistanceFactor(X1, X0, points, np.linalg.norm(points, axis=1) + 0.05, np.full(5, 0.1),
                            _extrinsics(rng))
    _check_jacobians(factor, {X0: random_nav(rng), X1: random_nav(rng)})


def test_landmark_factor_jacobian(rng):
    nav = random_nav(rng)
    l0, l1 = landmark_key(0), landmark_key(1)
    values = {X0: nav, l0: nav.p + [3.0, 1.0, 0.5], l1: nav.p + [-2.0, 4.0, 1.0]}
    factor = LandmarkFactor(X0, [l0, l1], np.array([3.0, 4.0]), 0.05, _extrinsics(rng))
    _check_jacobians(factor, values)
    assert factor.keys == (X0, l0, l1)


def test_point_observation_factor(rng):
    # Arrange
    nav = random_nav(rng)
    calib = _extrinsics(rng)
    point = np.array([4.0, -1.0, 0.5])
    l0 = landmark_key(0)
    position, _ = inverse_observation(nav.pose(), calib, point)
    factor = PointObservationFactor(X0, l0, point, spherical_covariance(point, 0.05, 0.03), calib)

    # Act
    at_truth = factor.error({X0: nav, l0: position})

    # Assert
    assert np.allclose(at_truth, 0.0, atol=1e-9), "The inverse observation reproduces the measured point"
    assert factor.kind == "landmark_init" and len(factor) == 3
    _check_jacobians(factor, {X0: nav, l0: position + rng.normal(size=3)})


def test_preintegration_factor_is_whitened(rng):
    samples = [ImuSample(k / 100.0, rng.normal(size=3) + [0, 0, 9.81], 0.2 * rng.normal(size=3)) for k in range(10)]
    xi = random_nav(rng)
    pim = preintegrate(samples, 0.0, 0.1, xi.ba, xi.bg, ProcessNoise())
    xj = pim.predict(xi).boxplus(0.01 * rng.normal(size=15))
    factor = PreintegrationFactor(X0, X1, pim)

    r = factor.error({X0: xi, X1: xj})

    raw = preintegration_residual(pim, xi, xj)[0]
    assert r @ r == pytest.approx(raw @ np.linalg.solve(pim.covariance, raw), rel=1e-8)
    assert len(factor) == 15
    _check_jacobians(factor, {X0: xi, X1: xj}, atol=1e-3)


def test_prior_from_covariance_cost(rng):
    # Arrange
    x0 = rng.normal(size=3)
    cov = np.diag([0.1, 0.2, 0.4])
    prior = PriorFactor.from_covariance(X0, x0, cov)
    delta = rng.normal(size=3)

    # Act
    at_mean = prior.cost({X0: x0})
    shifted = prior.cost({X0: x0 + delta})

    # Assert
    assert at_mean == pytest.approx(0.0)
    assert shifted == pytest.approx(0.5 * delta @ np.linalg.solve(cov, delta))
    assert x0.flags.writeable, "The caller's array is copied, not frozen"
    assert not prior.frozen[X0].flags.writeable


def test_prior_with_gradient_reproduces_quadratic(rng):
    a = rng.normal(size=(3, 3))
    info = a @ a.T + np.eye(3)
    grad = rng.normal(size=3)
    x0 = np.zeros(3)
    prior = PriorFactor((X0,), info, grad, {X0: x0})
    delta = rng.normal(size=3)

    change = prior.cost({X0: delta}) - prior.cost({X0: x0})

    assert change == pytest.approx(0.5 * delta @ info @ delta - grad @ delta)


def test_rank_deficient_prior_keeps_informative_rows():
    prior = PriorFactor((X0,), np.diag([2.0, 0.0]), np.zeros(2), {X0: np.zeros(2)})
    assert len(prior) == 1


def test_prior_jacobian_on_navigation_state(rng):
    nav = random_nav(rng)
    prior = PriorFactor.from_covariance(X0, nav, np.eye(15) * 0.01)
    _check_jacobians(prior, {X0: nav.boxplus(0.2 * rng.normal(size=15))})


def test_linear_factor_and_robust_weights():
    factor = LinearFactor((X0,), [np.eye(2)], np.zeros(2), sigma=0.5)
    r, jac = factor.linearize({X0: np.array([1.0, -1.0])})
    assert np.allclose(r, [2.0, -2.0])
    assert np.allclose(jac[X0], 2.0 * np.eye(2))
    assert factor.kernel is None

    factor.kernel = 1.0
    weighted, _ = factor.weighted({X0: np.array([0.1, 1.0])})
    assert np.allclose(weighted, [0.2, 2.0 * dcs_weight(4.0, 1.0)])


@pytest.mark.slow
def test_radar_factor_jacobians_over_many_states():
    rng = np.random.default_rng(2024)
    l0 = landmark_key(0)
    for _ in range(1000):
        calib = _extrinsics(rng)
        x0, x1 = random_nav(rng), random_nav(rng)
        values = {X0: x0, X1: x1, l0: x0.p + rng.normal(size=3) + [4.0, 0.0, 0.0]}
        dirs = directions_of(rng.normal(size=(3, 3)) + [3.0, 0.0, 0.0])
        points = rng.normal(size=(3, 3)) + [4.0, 0.0, 0.0]
        factors = [
            DopplerFactor(X0, dirs, rng.normal(size=3), rng.normal(size=3), 0.1, calib),
            DistanceFactor(X1, X0, points, np.full(3, 4.0), np.full(3, 0.1), calib),
            LandmarkFactor(X0, [l0], np.array([4.0]), 0.05, calib),
            PointObservationFactor(X0, l0, points[0], 0.01 * np.eye(3), calib),
        ]
        for factor in factors:
            _check_jacobians(factor, values, atol=1e-5)
