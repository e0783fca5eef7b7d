"""End-to-end scenarios on simulated flights; run with `pytest -m slow`."""
from dataclasses import replace

import numpy as np
import pytest

from conftest import run_backend_on
from src.common.config import RunConfig, SimConfig
from src.common.enums import Backend, CalibrationMode, TrajectoryFamily, YawProfile
from src.evaluation.metrics import (
    Trajectory,
    average_nees,
    compute_metrics,
    fraction_inside,
    nees_bounds,
    nees_position,
    speed_error,
    time_sync,
    traveled_distance,
)
from src.harness.pipeline import make_backend, miscalibrated_config, wrong_velocity_config
from src.sim.montecarlo import run_montecarlo, simulate
from src.sim.schemas import NoiseConfig, TrajectorySpec

pytestmark = pytest.mark.slow

EXCITED = TrajectorySpec(roll_amplitude=0.15, pitch_amplitude=0.15, yaw=YawProfile.SINUSOID, yaw_amplitude=0.5)


def _run(cfg: RunConfig, sim):
    backend = make_backend(cfg, sim.initial_state, sim.truth[0].t)
    outcomes = run_backend_on(backend, sim)
    truth = Trajectory.from_truth(sim.truth)
    aligned = time_sync(Trajectory.from_estimates([o.estimate for o in outcomes]), truth)
    return outcomes, aligned, traveled_distance(truth.p)


def _fg(cfg: RunConfig = RunConfig()) -> RunConfig:
    return cfg.model_copy(update={"backend": Backend.FG})


def test_zero_noise_closed_loop():
    # Arrange
    sim = simulate(SimConfig(seed=1, trajectory=EXCITED, noise=NoiseConfig.zero()))

    # Act
    ekf_outcomes, ekf, length = _run(RunConfig(), sim)
    fg_outcomes, fg, _ = _run(_fg(), sim)

    # Assert
    assert length > 90.0
    assert compute_metrics(ekf, length).final_drift_pct < 0.01
    assert compute_metrics(fg, length).final_drift_pct < 0.01

    same = [
        a.frontend.landmark_matches == b.frontend.landmark_matches
        and [(m.point_index, m.trail.id) for m in a.frontend.trail_matches]
        == [(m.point_index, m.trail.id) for m in b.frontend.trail_matches]
        for a, b in zip(ekf_outcomes, fg_outcomes)
    ]
    assert np.mean(same) > 0.95, "Both backends share the front-end decisions"


def test_noisy_monte_carlo_backends_agree():
    sims = run_montecarlo(SimConfig(seed=2, trajectory=EXCITED), 20)

    ekf = [compute_metrics(*_run(RunConfig(), sim)[1:]) for sim in sims]
    fg = [compute_metrics(*_run(_fg(), sim)[1:]) for sim in sims]

    assert np.median([r.final_drift_pct for r in ekf]) < 2.0
    ekf_mean = np.mean([r.rmse_position for r in ekf])
    fg_mean = np.mean([r.rmse_position for r in fg])
    assert abs(ekf_mean - fg_mean) <= 0.5 * max(ekf_mean, fg_mean)


def _first_converged(aligned, threshold: float = 0.1) -> float:
    """First time after which the speed error stays below `threshold`."""
    t = aligned.estimate.t
    above = np.flatnonzero(speed_error(aligned) > threshold)
    if len(above) == 0:
        return float(t[0])
    if above[-1] == len(t) - 1:
        return np.inf
    return float(t[above[-1] + 1])


def test_wrong_initial_velocity_convergence():
    spec = TrajectorySpec(family=TrajectoryFamily.HOVER_THEN_LOOP, hover_time=10.0, duration=30.0)
    sim = simulate(SimConfig(seed=3, trajectory=spec))

    _, ekf, _ = _run(wrong_velocity_config(RunConfig()), sim)
    _, fg, _ = _run(_fg(wrong_velocity_config(RunConfig())), sim)
    assert _first_converged(fg) <= _first_converged(ekf) < np.inf

    _, ekf_tight, _ = _run(wrong_velocity_config(RunConfig(), inflate=False), sim)
    _, fg_tight, _ = _run(_fg(wrong_velocity_config(RunConfig(), inflate=False)), sim)
    static = ekf_tight.estimate.t < 10.0
    assert np.mean(speed_error(ekf_tight)[static]) >= 2.0 * np.mean(speed_error(fg_tight)[fg_tight.estimate.t < 10.0])


def _average_nees(cfg: RunConfig, sims, settle: float = 5.0, cov_scale: float = 1.0) -> np.ndarray:
    series = []
    for sim in sims:
        _, aligned, _ = _run(cfg, sim)
        if cov_scale != 1.0:
            estimate = replace(aligned.estimate, position_cov=cov_scale * aligned.estimate.position_cov)
            aligned = replace(aligned, estimate=estimate)
        steady = aligned.estimate.t >= aligned.estimate.t[0] + settle
        series.append(nees_position(aligned)[steady])
    return average_nees(series)


def test_online_calibration_is_consistent():
    # Arrange
    sims = run_montecarlo(SimConfig(seed=4, trajectory=EXCITED), 20)
    true_pose = sims[0].config.extrinsics.pose()
    wrong_fixed = miscalibrated_config(RunConfig(), true_pose, calibration=CalibrationMode.FIXED)

    # Act
    online = _average_nees(RunConfig(), sims)
    fixed = _average_nees(wrong_fixed, sims)

    # Assert
    assert fraction_inside(online, nees_bounds(3, len(sims))) >= 0.7
    assert np.mean(fixed) > np.mean(online)


def test_overconfident_filter_fails_nees_band():
    sims = run_montecarlo(SimConfig(seed=4, trajectory=EXCITED), 20)
    hi = nees_bounds(3, len(sims))[1]

    overconfident = _average_nees(RunConfig(), sims, cov_scale=0.1)

    assert np.mean(overconfident > hi) > 0.5, "Shrinking the covariance tenfold must show up as inconsistency"


def test_smoother_covariance_is_consistent():
    sims = run_montecarlo(SimConfig(seed=6, trajectory=EXCITED), 10)

    fg = _average_nees(_fg(), sims)

    lo, hi = nees_bounds(3, len(sims))
    assert fraction_inside(fg, (lo, hi)) >= 0.6
    assert np.mean(fg > hi) < 0.3, "Landmark initialisation must not make the smoother overconfident"


def test_online_calibration_recovers_extrinsics():
    sim = simulate(SimConfig(seed=5, trajectory=EXCITED))
    true_pose = sim.config.extrinsics.pose()

    outcomes, _, _ = _run(miscalibrated_config(RunConfig(), true_pose), sim)

    final = outcomes[-1].estimate.calib
    assert np.rad2deg(np.linalg.norm(final.rotation.boxminus(true_pose.rotation))) < 5.0
    assert np.linalg.norm(final.p - true_pose.p) < 0.08
