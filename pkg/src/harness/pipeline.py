"""Estimation runs: dataset in, run directory out."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.common.config import RunConfig
from src.common.enums import Backend, CalibrationMode, EventKind
from src.common.errors import DatasetError, EstimatorError
from src.common.models import ScanOutcome
from src.ekf.estimator import MultiStateEkf
from src.ekf.state import UpdateReport
from src.evaluation.metrics import (
    AlignedRun,
    Trajectory,
    compute_metrics,
    monte_carlo_nees,
    time_sync,
    traveled_distance,
)
from src.evaluation.schemas import MetricsReport, NeesSummary
from src.fg.estimator import SlidingWindowSmoother, SolveReport
from src.geom.navstate import NavState
from src.geom.transforms import Pose, Rotation
from src.matching.frontend import FrontEndResult
from src.measurement.schemas import ExtrinsicsConfig
from .dataset import Dataset, events, load_dataset, read_jsonl, sha256, write_jsonl
from .schemas import (
    ClassRecord,
    FailureRecord,
    FrontEndRecord,
    MatchRecord,
    ReportRecord,
    RunManifest,
    SnapshotRecord,
)

logger = logging.getLogger(__name__)

SNAPSHOTS_FILE = "snapshots.jsonl"
REPORTS_FILE = "reports.jsonl"
FRONTEND_FILE = "frontend.jsonl"
FAILURE_FILE = "failure.json"
MANIFEST_FILE = "manifest.json"


def make_backend(cfg: RunConfig, nav: NavState, t0: float = 0.0, calib: Optional[Pose] = None):
    if cfg.backend == Backend.FG:
        return SlidingWindowSmoother(cfg, nav, t0, calib)
    return MultiStateEkf(cfg, nav, t0, calib)


def frontend_record(result: FrontEndResult) -> FrontEndRecord:
    return FrontEndRecord(
        t=result.t,
        clone_id=result.clone_id,
        landmark_matches=result.landmark_matches,
        trail_matches=[
            MatchRecord(point=m.point_index, trail=m.trail.id, history=m.trail.clone_ids())
            for m in result.trail_matches
        ],
        new_trails=result.new_trails,
        promotions=[(p.trail.id, p.point_index) for p in result.promotions],
        dropped_landmarks=result.dropped_landmarks,
        evicted_landmarks=result.evicted_landmarks,
    )


def report_record(t: float, report: Union[UpdateReport, SolveReport]) -> ReportRecord:
    if isinstance(report, UpdateReport):
        return ReportRecord(
            t=t,
            backend=Backend.EKF.value,
            classes={
                kind.value: ClassRecord(
                    offered=c.offered, accepted=c.accepted, rejected=c.rejected,
                    residuals=c.residuals, innovation=c.innovation, chi2=c.chi2, skipped=c.skipped,
                )
                for kind, c in report.classes.items()
            },
        )
    return ReportRecord(
        t=t,
        backend=Backend.FG.value,
        rows_added=report.added,
        rows_total=report.total,
        downweighted=report.downweighted,
        iterations=report.lm.iterations,
        initial_cost=report.lm.initial_cost,
        final_cost=report.lm.final_cost,
        converged=report.lm.converged,
        stop_reason=report.lm.reason,
    )


@dataclass(eq=False)
class RunResult:
    directory: Optional[Path]
    outcomes: List[ScanOutcome] = field(default_factory=list)
    failure: Optional[FailureRecord] = None

    @property
    def estimates(self):
        return [o.estimate for o in self.outcomes]


def run_backend(cfg: RunConfig, dataset: Dataset) -> RunResult:
    """Feed the merged event stream to a fresh backend; estimator errors end the run."""
    backend = make_backend(cfg, dataset.manifest.initial_state.to_nav(), dataset.manifest.initial_time)
    result = RunResult(directory=None)
    t = None
    try:
        for kind, item in events(dataset.imu, dataset.radar):
            t = item.t
            if kind == EventKind.IMU:
                backend.on_imu(item)
            else:
                result.outcomes.append(backend.on_radar(item))
    except EstimatorError as e:
        logger.error("estimator failed at t=%s: %s", t, e)
        result.failure = FailureRecord(t=t, error=type(e).__name__, message=str(e))
    return result


def run_pipeline(cfg: RunConfig, dataset: Union[Dataset, str, Path], out_dir: Union[str, Path]) -> RunResult:
    """Run one backend over a dataset and write snapshots, reports, decision log and manifest."""
    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    result = run_backend(cfg, dataset)
    result.directory = out_dir
    write_jsonl(out_dir / SNAPSHOTS_FILE, (SnapshotRecord.from_estimate(o.estimate) for o in result.outcomes))
    write_jsonl(out_dir / REPORTS_FILE, (report_record(o.estimate.t, o.report) for o in result.outcomes))
    write_jsonl(out_dir / FRONTEND_FILE, (frontend_record(o.frontend) for o in result.outcomes))
    written = [SNAPSHOTS_FILE, REPORTS_FILE, FRONTEND_FILE]
    if result.failure is not None:
        (out_dir / FAILURE_FILE).write_text(result.failure.model_dump_json(indent=2))
        written.append(FAILURE_FILE)

    manifest = RunManifest(
        backend=cfg.backend.value,
        config=cfg.model_dump(mode="json"),
        dataset=str(dataset.path),
        dataset_files=dataset.manifest.files,
        n_scans=len(result.outcomes),
        failed=result.failure is not None,
        files={name: sha256(out_dir / name) for name in written},
    )
    (out_dir / MANIFEST_FILE).write_text(manifest.model_dump_json(indent=2))
    logger.info("%s run over %s: %d scans -> %s", cfg.backend.value, dataset.path, len(result.outcomes), out_dir)
    return result


def _run_job(args) -> Tuple[str, bool]:
    cfg, dataset_dir, out_dir = args
    result = run_pipeline(cfg, dataset_dir, out_dir)
    return str(out_dir), result.failure is None


def run_many(
    cfg: RunConfig,
    dataset_dirs: Sequence[Union[str, Path]],
    out_root: Union[str, Path],
    jobs: int = 1,
) -> List[Tuple[str, bool]]:
    """One run directory per dataset, named after it; runs are independent processes when jobs > 1."""
    out_root = Path(out_root)
    work = [(cfg, Path(d), out_root / Path(d).name) for d in dataset_dirs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_job, work))
    return [_run_job(w) for w in work]


def wrong_velocity_config(
    cfg: RunConfig,
    velocity: Tuple[float, float, float] = (2.0, 2.0, 0.0),
    inflate: bool = True,
    velocity_sigma: float = 2.0,
) -> RunConfig:
    """Start from a wrong velocity, optionally with a velocity σ that covers the error."""
    sigma = cfg.init.sigma
    if inflate:
        sigma = sigma.model_copy(update={"velocity": velocity_sigma})
    init = cfg.init.model_copy(update={"velocity_override": tuple(velocity), "sigma": sigma})
    return cfg.model_copy(update={"init": init})


def miscalibrated_config(
    cfg: RunConfig,
    true_extrinsics: Pose,
    rotation_error_deg: Tuple[float, float, float] = (20.0, 20.0, 20.0),
    translation_error: Tuple[float, float, float] = (0.4, 0.0, 0.0),
    calibration: CalibrationMode = CalibrationMode.ONLINE,
) -> RunConfig:
    """Initial extrinsics = truth perturbed on the right; online mode gets σ's that cover the error."""
    perturbed = Pose(
        true_extrinsics.rotation * Rotation.from_euler("xyz", rotation_error_deg, degrees=True),
        true_extrinsics.p + np.asarray(translation_error, dtype=float),
        true_extrinsics.target,
        true_extrinsics.source,
    )
    sigma = cfg.init.sigma.model_copy(update={
        "calib_attitude": max(cfg.init.sigma.calib_attitude, float(np.deg2rad(np.max(np.abs(rotation_error_deg))))),
        "calib_position": max(cfg.init.sigma.calib_position, float(np.max(np.abs(translation_error)))),
    })
    return cfg.model_copy(update={
        "extrinsics": ExtrinsicsConfig.from_pose(perturbed),
        "init": cfg.init.model_copy(update={"sigma": sigma}),
        "ekf": cfg.ekf.model_copy(update={"calibration": calibration}),
    })


def load_run(run_dir: Union[str, Path]) -> Tuple[RunManifest, List[SnapshotRecord]]:
    run_dir = Path(run_dir)
    path = run_dir / MANIFEST_FILE
    if not path.is_file():
        raise DatasetError(f"no {MANIFEST_FILE} in run directory {run_dir}")
    manifest = RunManifest.model_validate_json(path.read_text())
    return manifest, read_jsonl(run_dir / SNAPSHOTS_FILE, SnapshotRecord)


def align_run(
    run_dir: Union[str, Path],
    dataset: Optional[Union[Dataset, str, Path]] = None,
) -> Tuple[RunManifest, Dataset, AlignedRun]:
    """A run directory's estimates paired with the ground truth of the dataset it was run on."""
    manifest, snapshots = load_run(run_dir)
    if dataset is None:
        dataset = manifest.dataset
    if not isinstance(dataset, Dataset):
        dataset = load_dataset(dataset)
    if not snapshots:
        raise DatasetError(f"run {run_dir} has no snapshots")
    truth = Trajectory.from_truth(dataset.truth)
    estimate = Trajectory.from_estimates([s.to_estimate() for s in snapshots])
    return manifest, dataset, time_sync(estimate, truth)


def _metrics(manifest: RunManifest, dataset: Dataset, aligned: AlignedRun, settle_time: float) -> MetricsReport:
    return compute_metrics(
        aligned,
        traveled_distance(Trajectory.from_truth(dataset.truth).p),
        name=dataset.path.name,
        backend=manifest.backend,
        settle_time=settle_time,
    )


def evaluate_run(
    run_dir: Union[str, Path],
    dataset: Optional[Union[Dataset, str, Path]] = None,
    settle_time: float = 0.0,
) -> MetricsReport:
    """Metrics of a run directory against the ground truth of the dataset it was run on."""
    return _metrics(*align_run(run_dir, dataset), settle_time)


def evaluate_runs(
    run_dirs: Sequence[Union[str, Path]], settle_time: float = 0.0
) -> Tuple[List[MetricsReport], Dict[str, Optional[NeesSummary]]]:
    """Per-run metrics plus the Monte-Carlo NEES of each backend's runs."""
    reports: List[MetricsReport] = []
    by_backend: Dict[str, List[AlignedRun]] = {}
    for run_dir in run_dirs:
        manifest, dataset, aligned = align_run(run_dir)
        reports.append(_metrics(manifest, dataset, aligned, settle_time))
        by_backend.setdefault(manifest.backend, []).append(aligned)
    nees = {backend: monte_carlo_nees(runs, settle_time) for backend, runs in by_backend.items()}
    return reports, nees
