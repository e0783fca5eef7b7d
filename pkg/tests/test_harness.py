import json
from unittest.mock import Mock

import numpy as np
import pytest

from src.common.config import RunConfig
from src.common.enums import Backend, CalibrationMode, EventKind
from src.common.errors import DatasetError, StaleCloneError
from src.common.models import ImuSample, RadarScan
from src.evaluation.metrics import nees_bounds
from src.geom.transforms import Pose
from src.harness import pipeline
from src.harness.dataset import (
    IMU_FILE,
    MANIFEST_FILE,
    RADAR_FILE,
    events,
    load_dataset,
    sha256,
    write_dataset,
)
from src.harness.pipeline import (
    FAILURE_FILE,
    SNAPSHOTS_FILE,
    evaluate_run,
    evaluate_runs,
    load_run,
    miscalibrated_config,
    run_pipeline,
    wrong_velocity_config,
)
from src.harness.schemas import FORMAT_VERSION
from src.measurement.schemas import ExtrinsicsConfig


@pytest.fixture(scope="module")
def dataset_dir(noiseless_sim, tmp_path_factory):
    directory = tmp_path_factory.mktemp("data") / "circle"
    write_dataset(noiseless_sim, directory)
    return directory


@pytest.fixture(scope="module")
def ekf_run(dataset_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "ekf"
    return run_pipeline(RunConfig(), dataset_dir, out)


def test_dataset_round_trip(dataset_dir, noiseless_sim):
    # Act
    data = load_dataset(dataset_dir)

    # Assert
    assert data.manifest.format_version == FORMAT_VERSION
    assert len(data.imu) == len(noiseless_sim.imu)
    assert len(data.radar) == len(noiseless_sim.radar)
    assert len(data.truth) == len(noiseless_sim.truth)
    assert np.allclose(data.radar[3].positions, noiseless_sim.radar[3].positions)
    assert np.array_equal(data.radar[3].truth_ids, noiseless_sim.radar[3].truth_ids)
    assert np.allclose(data.manifest.initial_state.to_nav().v, noiseless_sim.initial_state.v)
    assert data.manifest.files[IMU_FILE] == sha256(dataset_dir / IMU_FILE)


def _copy(src, dst):
    dst.mkdir()
    for path in src.iterdir():
        (dst / path.name).write_bytes(path.read_bytes())
    return dst


def test_tampered_file_fails_hash_check(dataset_dir, tmp_path):
    copy = _copy(dataset_dir, tmp_path / "copy")
    with open(copy / RADAR_FILE, "a") as f:
        f.write("\n")

    with pytest.raises(DatasetError, match="hash mismatch"):
        load_dataset(copy)
    assert len(load_dataset(copy, verify=False).radar) > 0, "Blank lines are skipped when not verifying"


def test_unsorted_timestamps_are_rejected(dataset_dir, tmp_path):
    copy = _copy(dataset_dir, tmp_path / "copy")
    lines = (copy / RADAR_FILE).read_text().splitlines()
    (copy / RADAR_FILE).write_text("\n".join(reversed(lines)) + "\n")

    with pytest.raises(DatasetError, match="not strictly increasing"):
        load_dataset(copy, verify=False)


def test_manifest_problems(dataset_dir, tmp_path):
    with pytest.raises(DatasetError):
        load_dataset(tmp_path)

    copy = _copy(dataset_dir, tmp_path / "copy")
    manifest = json.loads((copy / MANIFEST_FILE).read_text())
    manifest["format_version"] = FORMAT_VERSION + 1
    (copy / MANIFEST_FILE).write_text(json.dumps(manifest))
    with pytest.raises(DatasetError, match="format version"):
        load_dataset(copy)


def test_events_put_imu_first_on_ties():
    imu = [ImuSample(t, np.zeros(3), np.zeros(3)) for t in (0.0, 0.1, 0.2)]
    radar = [RadarScan(t=0.1)]

    kinds = [(kind, item.t) for kind, item in events(imu, radar)]

    assert kinds == [
        (EventKind.IMU, 0.0),
        (EventKind.IMU, 0.1),
        (EventKind.RADAR, 0.1),
        (EventKind.IMU, 0.2),
    ]


def test_run_pipeline_writes_run_directory(ekf_run, noiseless_sim):
    out = ekf_run.directory
    manifest, snapshots = load_run(out)

    assert ekf_run.failure is None
    assert manifest.backend == Backend.EKF.value and not manifest.failed
    assert manifest.n_scans == len(noiseless_sim.radar) == len(snapshots)
    assert manifest.files[SNAPSHOTS_FILE] == sha256(out / SNAPSHOTS_FILE)
    assert not (out / FAILURE_FILE).exists()
    reports = (out / pipeline.REPORTS_FILE).read_text().splitlines()
    assert len(reports) == len(snapshots)
    assert json.loads(reports[0])["backend"] == "ekf"


def test_evaluate_run_against_truth(ekf_run):
    report = evaluate_run(ekf_run.directory)
    assert report.backend == "ekf" and report.run == "circle"
    assert report.mae_position < 0.02
    assert report.traveled_distance > 0
    assert report.nees_bounds is not None


def test_evaluate_runs_averages_nees_per_backend(ekf_run, dataset_dir, tmp_path):
    second = run_pipeline(RunConfig(seed=9), dataset_dir, tmp_path / "ekf2")

    reports, nees = evaluate_runs([ekf_run.directory, second.directory], settle_time=1.0)

    assert [r.backend for r in reports] == ["ekf", "ekf"]
    assert nees.keys() == {"ekf"}
    summary = nees["ekf"]
    assert summary.n_runs == 2 and summary.n_samples > 0
    assert summary.bounds == pytest.approx(nees_bounds(3, 2))
    assert 0.0 <= summary.inside <= 1.0


def test_estimator_failure_is_recorded(dataset_dir, tmp_path, monkeypatch):
    # Arrange
    backend = Mock()
    backend.on_radar.side_effect = StaleCloneError("trail entry outlived its clone")
    monkeypatch.setattr(pipeline, "make_backend", lambda *args, **kwargs: backend)

    # Act
    result = run_pipeline(RunConfig(), dataset_dir, tmp_path / "run")

    # Assert
    assert result.failure is not None and result.failure.error == "StaleCloneError"
    assert result.outcomes == []
    failure = json.loads((tmp_path / "run" / FAILURE_FILE).read_text())
    assert failure["message"] == "trail entry outlived its clone"
    manifest, snapshots = load_run(tmp_path / "run")
    assert manifest.failed and snapshots == []
    with pytest.raises(DatasetError, match="no snapshots"):
        evaluate_run(tmp_path / "run")


def test_load_run_requires_manifest(tmp_path):
    with pytest.raises(DatasetError):
        load_run(tmp_path)


def test_wrong_velocity_config():
    cfg = wrong_velocity_config(RunConfig())
    assert cfg.init.velocity_override == (2.0, 2.0, 0.0)
    assert cfg.init.sigma.velocity == 2.0

    plain = wrong_velocity_config(RunConfig(), inflate=False)
    assert plain.init.sigma.velocity == RunConfig().init.sigma.velocity


def test_miscalibrated_config_perturbs_on_the_right():
    true_pose = ExtrinsicsConfig().pose()
    cfg = miscalibrated_config(RunConfig(), true_pose, calibration=CalibrationMode.FIXED)

    start = cfg.extrinsics.pose()
    assert isinstance(start, Pose)
    assert np.allclose(start.p - true_pose.p, [0.4, 0.0, 0.0])
    assert np.rad2deg(np.linalg.norm(start.rotation.boxminus(true_pose.rotation))) > 20.0
    assert cfg.ekf.calibration == CalibrationMode.FIXED
    assert cfg.init.sigma.calib_attitude == pytest.approx(np.deg2rad(20.0))
    assert cfg.init.sigma.calib_position == pytest.approx(0.4)
