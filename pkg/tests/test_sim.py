import numpy as np
import pytest

from src.common.config import SimConfig
from src.common.enums import TrajectoryFamily, YawProfile
from src.common.errors import ConfigError
from src.ekf.filter import transition
from src.measurement.schemas import ExtrinsicsConfig
from src.sim.montecarlo import run_montecarlo, simulate
from src.sim.schemas import NoiseConfig, RadarSensorConfig, TrajectorySpec, WorldConfig
from src.sim.sensors import doppler_of, gen_world, radar_pose, sample_imu, sample_radar
from src.sim.trajectory import gen_trajectory, path_length


def _short_sim(**updates) -> SimConfig:
    base = SimConfig(
        trajectory=TrajectorySpec(family=TrajectoryFamily.CIRCLE, amplitude=(3.0, 3.0, 0.0), period=20.0, duration=2.0),
        world=WorldConfig(n_scatterers=200),
    )
    return base.model_copy(update=updates)


@pytest.mark.parametrize("family", list(TrajectoryFamily))
def test_trajectory_derivatives_are_consistent(family):
    spec = TrajectorySpec(family=family, amplitude=(3.0, 3.0, 0.3), period=20.0, duration=4.0, hover_time=1.0,
                          ramp_time=1.0)
    truth = gen_trajectory(spec, rate=400.0)
    t = np.array([s.t for s in truth])
    p = np.array([s.nav.p for s in truth])
    v = np.array([s.nav.v for s in truth])

    # midpoint velocity against the central difference of position
    v_mid = 0.5 * (v[1:] + v[:-1])
    assert np.allclose(np.diff(p, axis=0) / np.diff(t)[:, None], v_mid, atol=1e-3)


def test_hover_then_loop_starts_at_rest():
    spec = TrajectorySpec(family=TrajectoryFamily.HOVER_THEN_LOOP, amplitude=(3.0, 3.0, 0.0), period=20.0,
                          duration=5.0, hover_time=2.0)
    truth = gen_trajectory(spec, rate=100.0)
    resting = [s for s in truth if s.t <= 2.0]
    assert all(np.allclose(s.nav.v, 0.0) for s in resting), "Expected zero velocity during the hover phase"
    assert np.linalg.norm(truth[-1].nav.v) > 0.5


def test_trajectory_speed_bound():
    spec = TrajectorySpec(family=TrajectoryFamily.CIRCLE, amplitude=(20.0, 20.0, 0.0), period=10.0, max_speed=5.0)
    with pytest.raises(ConfigError):
        gen_trajectory(spec)


def test_yaw_rate_profile_gives_constant_body_rate():
    spec = TrajectorySpec(family=TrajectoryFamily.HOVER, yaw=YawProfile.RATE, yaw_rate=0.3, duration=1.0)
    truth = gen_trajectory(spec, rate=100.0)
    assert np.allclose([s.omega for s in truth], [0.0, 0.0, 0.3])


def test_path_length_of_a_square():
    square = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [0, 0, 0]], dtype=float)
    assert path_length(square) == pytest.approx(4.0)


def test_noiseless_imu_reproduces_truth():
    # Arrange
    spec = TrajectorySpec(family=TrajectoryFamily.LISSAJOUS, amplitude=(3.0, 2.0, 0.3), period=20.0, duration=3.0,
                          yaw=YawProfile.SINUSOID, yaw_amplitude=0.4, roll_amplitude=0.1, pitch_amplitude=0.1)
    truth = gen_trajectory(spec, rate=200.0)
    imu = sample_imu(truth, NoiseConfig.zero())

    # Act: integrate with the filter's own propagation model
    nav = truth[0].nav
    for k, sample in enumerate(imu):
        nav, _ = transition(nav, sample, truth[k + 1].t - truth[k].t)

    # Assert
    final = truth[-1].nav
    assert np.allclose(nav.p, final.p, atol=1e-4), f"position drifted: {nav.p - final.p}"
    assert np.allclose(nav.v, final.v, atol=1e-6)
    assert np.linalg.norm(nav.q.boxminus(final.q)) < 1e-8


def test_noiseless_radar_sees_world_points(rng):
    # Arrange
    truth = gen_trajectory(TrajectorySpec(family=TrajectoryFamily.CIRCLE, amplitude=(3.0, 3.0, 0.0), period=20.0,
                                          duration=1.0), rate=100.0)
    world = gen_world(truth, WorldConfig(n_scatterers=300), rng)
    sensor = RadarSensorConfig()
    extrinsics = ExtrinsicsConfig(rotation_deg=(0.0, 0.0, 0.0)).pose()

    # Act
    scan = sample_radar(truth[50], world, NoiseConfig.zero(), sensor, extrinsics, rng)

    # Assert
    assert len(scan) > 0, "Expected visible scatterers"
    assert (scan.truth_ids >= 0).all(), "No clutter without a clutter rate"
    to_world = radar_pose(truth[50], extrinsics)
    for point, tid in zip(scan.positions, scan.truth_ids):
        assert np.allclose(to_world.transform_point(point), world.positions[tid], atol=1e-9)
    ranges = scan.ranges()
    assert (ranges >= sensor.min_range).all() and (ranges <= sensor.max_range).all()
    expected = doppler_of(scan.positions / ranges[:, None], truth[50], extrinsics)
    assert np.allclose(scan.doppler, expected)


def test_clutter_is_labelled(rng):
    truth = gen_trajectory(TrajectorySpec(family=TrajectoryFamily.HOVER, duration=0.1), rate=100.0)
    world = gen_world(truth, WorldConfig(n_scatterers=0), rng)
    noise = NoiseConfig.zero().model_copy(update={"clutter_rate": 20.0})
    scan = sample_radar(truth[0], world, noise, RadarSensorConfig(), ExtrinsicsConfig().pose(), rng)
    assert len(scan) > 0 and (scan.truth_ids == -1).all()


def test_simulation_is_reproducible():
    cfg = _short_sim(seed=11)
    a, b = simulate(cfg, 0), simulate(cfg, 0)
    assert np.array_equal(a.imu[5].accel, b.imu[5].accel)
    assert len(a.radar) == len(b.radar)
    assert np.array_equal(a.radar[0].positions, b.radar[0].positions)


def test_radar_stamps_fall_on_imu_stamps():
    sim = simulate(_short_sim())
    imu_times = {s.t for s in sim.imu}
    assert sim.radar, "Expected radar scans"
    assert all(scan.t in imu_times for scan in sim.radar)
    assert all(scan.gyro is not None for scan in sim.radar)


def test_montecarlo_runs_share_truth_but_not_noise():
    runs = run_montecarlo(_short_sim(n_runs=2))
    assert len(runs) == 2
    assert runs[0].world is runs[1].world
    assert not np.array_equal(runs[0].imu[3].gyro, runs[1].imu[3].gyro), "Runs must draw independent noise"


def test_montecarlo_rejects_zero_runs():
    with pytest.raises(ValueError):
        run_montecarlo(_short_sim(), n_runs=0)
