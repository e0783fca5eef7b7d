import json

import numpy as np
import pandas as pd
import pytest

from src.common.errors import DatasetError
from src.evaluation.metrics import (
    AlignedRun,
    Trajectory,
    attitude_errors_deg,
    compare_backends,
    compute_metrics,
    final_drift_pct,
    mae_norm,
    monte_carlo_nees,
    nees_bounds,
    nees_position,
    rmse_norm,
    time_sync,
    traveled_distance,
    write_table,
)
from src.evaluation.schemas import MetricsReport


def _line(n=11, length=100.0, offset=(0.0, 0.0, 0.0), cov=None, yaw_deg=0.0):
    t = np.linspace(0.0, 10.0, n)
    p = np.column_stack([np.linspace(0.0, length, n), np.zeros(n), np.zeros(n)]) + offset
    half = np.deg2rad(yaw_deg) / 2
    q = np.tile([np.cos(half), 0.0, 0.0, np.sin(half)], (n, 1))
    v = np.tile([length / 10.0, 0.0, 0.0], (n, 1))
    return Trajectory(t, p, q, v, None if cov is None else np.tile(cov, (n, 1, 1)))


def _report(rmse, drift=1.0):
    return MetricsReport(mae_position=rmse, rmse_position=rmse, rmse_attitude=0.0, rmse_velocity=0.0,
                         final_drift_pct=drift, traveled_distance=10.0)


def test_constant_offset_errors():
    run = AlignedRun(_line(offset=(0.3, 0.4, 0.0)), _line())
    assert mae_norm(run) == pytest.approx(0.5)
    assert rmse_norm(run.position_error) == pytest.approx(0.5)


def test_final_drift_percentage():
    truth = _line()
    run = AlignedRun(_line(offset=(0.0, 1.0, 0.0)), truth)
    assert traveled_distance(truth.p) == pytest.approx(100.0)
    assert final_drift_pct(run, 100.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        final_drift_pct(run, 0.0)


def test_nees_bounds_for_one_and_many_runs():
    lo, hi = nees_bounds(3, 1)
    assert lo == pytest.approx(0.2158, abs=1e-4)
    assert hi == pytest.approx(9.3484, abs=1e-4)

    lo50, hi50 = nees_bounds(3, 50)
    assert lo < lo50 < 3.0 < hi50 < hi, "Averaging over runs narrows the band around the dimension"


def test_nees_uses_position_covariance():
    run = AlignedRun(_line(offset=(0.3, 0.4, 0.0), cov=np.eye(3) * 0.25), _line())
    assert np.allclose(nees_position(run), 1.0)

    with pytest.raises(ValueError):
        nees_position(AlignedRun(_line(), _line()))


def test_attitude_error_is_relative_rotation():
    run = AlignedRun(_line(yaw_deg=10.0), _line())
    errors = attitude_errors_deg(run)
    assert np.allclose(errors[:, 2], 10.0)
    assert np.allclose(errors[:, :2], 0.0)


def test_time_sync_pairs_nearest_and_drops_strays():
    # Arrange
    truth = _line(n=31)
    truth = Trajectory(np.arange(31) * 0.01, truth.p, truth.q, truth.v)
    estimate = _line(n=3)
    estimate = Trajectory(np.array([0.1, 0.204, 0.5]), estimate.p, estimate.q, estimate.v)

    # Act
    run = time_sync(estimate, truth)

    # Assert
    assert len(run) == 2, "The estimate at 0.5 s has no truth within half a period"
    assert np.allclose(run.truth.t, [0.1, 0.2])


def test_metrics_need_samples():
    empty = time_sync(_line(n=0), _line())
    with pytest.raises(ValueError):
        mae_norm(empty)


def test_compute_metrics_skips_settling_time():
    estimate = _line(offset=(0.3, 0.4, 0.0), cov=np.eye(3) * 0.25)
    report = compute_metrics(AlignedRun(estimate, _line()), 100.0, name="run_000", backend="ekf", settle_time=5.0)
    assert report.n_samples == 11
    assert report.mae_position == pytest.approx(0.5)
    assert report.nees_mean == pytest.approx(1.0)
    assert report.nees_inside == pytest.approx(1.0)
    assert report.final_drift_pct == pytest.approx(0.5)


def test_compare_backends_table():
    table, summary = compare_backends({"a": _report(1.0), "b": _report(3.0)}, {"a": _report(1.5), "b": _report(2.5)})

    assert list(table.index) == ["a", "b", "mean", "std"]
    assert table.loc["mean", "ekf_rmse_position"] == pytest.approx(2.0)
    assert summary.ekf_std == pytest.approx(1.0)
    assert summary.relative_gap == pytest.approx(0.0)


def test_compare_backends_requires_matching_datasets():
    with pytest.raises(DatasetError):
        compare_backends({"a": _report(1.0)}, {"b": _report(1.0)})


def test_write_table_with_summary(tmp_path):
    table = pd.DataFrame({"x": [1.0, 2.0]}, index=pd.Index(["a", "b"], name="dataset"))
    path = tmp_path / "out" / "table.csv"

    write_table(table, path, {"mean": 1.5})

    assert pd.read_csv(path, index_col=0)["x"].tolist() == [1.0, 2.0]
    assert json.loads(path.with_suffix(".json").read_text()) == {"mean": 1.5}


def _gaussian_runs(rng, n_runs, reported_scale, n=200, sigma=0.5):
    """Runs whose errors really are N(0, σ²I) but which report σ²I scaled by `reported_scale`."""
    truth = _line(n=n)
    runs = []
    for _ in range(n_runs):
        cov = np.tile(np.eye(3) * sigma**2 * reported_scale, (n, 1, 1))
        p = truth.p + sigma * rng.normal(size=(n, 3))
        runs.append(AlignedRun(Trajectory(truth.t, p, truth.q, truth.v, cov), truth))
    return runs


def test_monte_carlo_nees_of_a_consistent_estimator(rng):
    summary = monte_carlo_nees(_gaussian_runs(rng, 20, 1.0))

    assert summary.n_runs == 20 and summary.n_samples == 200
    assert summary.bounds == pytest.approx(nees_bounds(3, 20))
    assert summary.average_nees == pytest.approx(3.0, abs=0.2)
    assert summary.inside > 0.85


def test_overconfident_estimator_leaves_the_nees_band(rng):
    summary = monte_carlo_nees(_gaussian_runs(rng, 20, 0.1))

    assert summary.average_nees > summary.bounds[1]
    assert 1.0 - summary.inside > 0.5, "A covariance ten times too small fails the consistency check"


def test_monte_carlo_nees_needs_covariance_and_steady_samples(rng):
    runs = _gaussian_runs(rng, 2, 1.0, n=11)
    assert monte_carlo_nees(runs + [AlignedRun(_line(), _line())]) is None
    assert monte_carlo_nees(runs, settle_time=100.0) is None
    assert monte_carlo_nees(runs, settle_time=5.0).n_samples == 6
