"""Accuracy and consistency metrics.

No trajectory alignment is applied anywhere: position and yaw are
unobservable, and aligning would hide exactly the drift being measured.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation as SciRotation
from scipy.stats import chi2

from src.common.errors import DatasetError
from src.common.models import Estimate, TruthState
from .schemas import ComparisonSummary, MetricsReport, NeesSummary

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Column-wise time series; quaternions are (w, x, y, z)."""

    t: np.ndarray
    p: np.ndarray
    q: np.ndarray
    v: np.ndarray
    position_cov: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_estimates(cls, estimates: Sequence[Estimate]) -> "Trajectory":
        covs = [e.position_covariance for e in estimates]
        return cls(
            t=np.array([e.t for e in estimates], dtype=float),
            p=np.array([e.nav.p for e in estimates]).reshape(-1, 3),
            q=np.array([e.nav.q.q for e in estimates]).reshape(-1, 4),
            v=np.array([e.nav.v for e in estimates]).reshape(-1, 3),
            position_cov=None if any(c is None for c in covs) or not covs else np.array(covs),
        )

    @classmethod
    def from_truth(cls, truth: Sequence[TruthState]) -> "Trajectory":
        return cls(
            t=np.array([s.t for s in truth], dtype=float),
            p=np.array([s.nav.p for s in truth]).reshape(-1, 3),
            q=np.array([s.nav.q.q for s in truth]).reshape(-1, 4),
            v=np.array([s.nav.v for s in truth]).reshape(-1, 3),
        )

    def take(self, idx: np.ndarray) -> "Trajectory":
        return Trajectory(
            self.t[idx], self.p[idx], self.q[idx], self.v[idx],
            None if self.position_cov is None else self.position_cov[idx],
        )


@dataclass(frozen=True, eq=False)
class AlignedRun:
    estimate: Trajectory
    truth: Trajectory

    def __len__(self) -> int:
        return len(self.estimate)

    @property
    def position_error(self) -> np.ndarray:
        return self.estimate.p - self.truth.p


def time_sync(estimate: Trajectory, truth: Trajectory, tolerance: Optional[float] = None) -> AlignedRun:
    """Nearest-neighbour pairing; estimates without a truth sample within `tolerance` are dropped.

    The default tolerance is half the median estimate period.
    """
    if len(estimate) == 0 or len(truth) == 0:
        return AlignedRun(estimate.take(np.zeros(0, dtype=int)), truth.take(np.zeros(0, dtype=int)))
    if tolerance is None:
        tolerance = 0.5 * float(np.median(np.diff(estimate.t))) if len(estimate) > 1 else np.inf

    right = np.clip(np.searchsorted(truth.t, estimate.t), 1, max(len(truth) - 1, 1))
    left = right - 1
    if len(truth) == 1:
        nearest = np.zeros(len(estimate), dtype=int)
    else:
        nearest = np.where(
            np.abs(truth.t[left] - estimate.t) <= np.abs(truth.t[right] - estimate.t), left, right
        )
    keep = np.abs(truth.t[nearest] - estimate.t) <= tolerance
    if not keep.all():
        logger.debug("time sync dropped %d of %d estimates", (~keep).sum(), len(estimate))
    return AlignedRun(estimate.take(np.flatnonzero(keep)), truth.take(nearest[keep]))


def _require(run: AlignedRun) -> None:
    if len(run) == 0:
        raise ValueError("metrics need at least one time-synced sample")


def mae_norm(run: AlignedRun) -> float:
    """Norm of the per-axis mean absolute position error."""
    _require(run)
    return float(np.linalg.norm(np.mean(np.abs(run.position_error), axis=0)))


def rmse_norm(errors: np.ndarray) -> float:
    errors = np.asarray(errors, dtype=float).reshape(len(errors), -1)
    if len(errors) == 0:
        raise ValueError("metrics need at least one time-synced sample")
    return float(np.linalg.norm(np.sqrt(np.mean(errors**2, axis=0))))


def attitude_errors_deg(run: AlignedRun) -> np.ndarray:
    """Per-axis xyz Euler angles of R_trueᵀ R_est [deg]."""
    def rot(q: np.ndarray) -> SciRotation:
        return SciRotation.from_quat(q[:, [1, 2, 3, 0]])

    return (rot(run.truth.q).inv() * rot(run.estimate.q)).as_euler("xyz", degrees=True)


def traveled_distance(positions: np.ndarray) -> float:
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    return float(np.sum(np.linalg.norm(np.diff(positions, axis=0), axis=1)))


def final_drift_pct(run: AlignedRun, path_length: float) -> float:
    """100 · final position error norm / traveled distance."""
    _require(run)
    if path_length <= 0.0:
        raise ValueError("final drift is undefined for a zero-length path")
    return float(100.0 * np.linalg.norm(run.position_error[-1]) / path_length)


def nees_position(run: AlignedRun) -> np.ndarray:
    """eᵀΣ⁻¹e per sample with the estimate's position covariance."""
    if run.estimate.position_cov is None:
        raise ValueError("estimates carry no position covariance")
    errors = run.position_error
    try:
        solved = np.linalg.solve(run.estimate.position_cov, errors[..., None])[..., 0]
    except np.linalg.LinAlgError as e:
        raise ValueError("singular position covariance in NEES") from e
    return np.einsum("ni,ni->n", errors, solved)


def nees_bounds(dof: int = 3, n_runs: int = 1, confidence: float = 0.95) -> Tuple[float, float]:
    """Two-sided band for a NEES averaged over `n_runs` runs: χ²_{n·dof} quantiles / n."""
    tail = 0.5 * (1.0 - confidence)
    lo, hi = chi2.ppf([tail, 1.0 - tail], dof * n_runs)
    return float(lo / n_runs), float(hi / n_runs)


def fraction_inside(series: np.ndarray, bounds: Tuple[float, float]) -> float:
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        return float("nan")
    return float(np.mean((series >= bounds[0]) & (series <= bounds[1])))


def average_nees(series: Sequence[np.ndarray]) -> np.ndarray:
    """Monte-Carlo average over runs sharing timestamps (truncated to the shortest)."""
    n = min(len(s) for s in series)
    return np.mean([np.asarray(s)[:n] for s in series], axis=0)


def monte_carlo_nees(
    runs: Sequence[AlignedRun], settle_time: float = 0.0, confidence: float = 0.95
) -> Optional[NeesSummary]:
    """Average the position NEES across runs and test it against the band scaled to the run count.

    Returns None when a run has no covariance or nothing is left after `settle_time`.
    """
    series = []
    for run in runs:
        if len(run) == 0 or run.estimate.position_cov is None:
            logger.info("a run without position covariance; no Monte-Carlo NEES")
            return None
        steady = run.estimate.t >= run.estimate.t[0] + settle_time
        series.append(nees_position(run)[steady])
    if not series or min(len(s) for s in series) == 0:
        return None
    averaged = average_nees(series)
    bounds = nees_bounds(3, len(series), confidence)
    return NeesSummary(
        n_runs=len(series),
        n_samples=len(averaged),
        average_nees=float(np.mean(averaged)),
        inside=fraction_inside(averaged, bounds),
        bounds=bounds,
    )


def speed_error(run: AlignedRun) -> np.ndarray:
    """‖v_est − v_true‖ per sample."""
    return np.linalg.norm(run.estimate.v - run.truth.v, axis=1)


def compute_metrics(
    run: AlignedRun,
    path_length: float,
    name: str = "",
    backend: str = "",
    settle_time: float = 0.0,
) -> MetricsReport:
    """All scalar metrics of one run; NEES statistics skip the first `settle_time` seconds."""
    _require(run)
    nees_mean = nees_inside = bounds = None
    if run.estimate.position_cov is not None:
        steady = run.estimate.t >= run.estimate.t[0] + settle_time
        series = nees_position(run)[steady]
        bounds = nees_bounds(3, 1)
        nees_mean = float(np.mean(series)) if series.size else None
        nees_inside = fraction_inside(series, bounds) if series.size else None

    return MetricsReport(
        run=name,
        backend=backend,
        n_samples=len(run),
        mae_position=mae_norm(run),
        rmse_position=rmse_norm(run.position_error),
        rmse_attitude=rmse_norm(attitude_errors_deg(run)),
        rmse_velocity=rmse_norm(run.estimate.v - run.truth.v),
        final_drift_pct=final_drift_pct(run, path_length),
        traveled_distance=path_length,
        nees_mean=nees_mean,
        nees_inside=nees_inside,
        nees_bounds=bounds,
    )


def compare_backends(
    ekf: Mapping[str, MetricsReport],
    fg: Mapping[str, MetricsReport],
) -> Tuple[pd.DataFrame, ComparisonSummary]:
    """Paired ‖RMSE‖ position table, one row per dataset, plus mean and std rows."""
    if set(ekf) != set(fg):
        raise DatasetError(
            f"EKF and FG runs cover different datasets: {sorted(set(ekf) ^ set(fg))}"
        )
    names = sorted(ekf)
    table = pd.DataFrame(
        {
            "ekf_rmse_position": [ekf[n].rmse_position for n in names],
            "fg_rmse_position": [fg[n].rmse_position for n in names],
            "ekf_final_drift_pct": [ekf[n].final_drift_pct for n in names],
            "fg_final_drift_pct": [fg[n].final_drift_pct for n in names],
        },
        index=pd.Index(names, name="dataset"),
    )
    means, stds = table.mean(), table.std(ddof=0)
    summary = ComparisonSummary(
        datasets=names,
        ekf_mean=float(means["ekf_rmse_position"]),
        ekf_std=float(stds["ekf_rmse_position"]),
        fg_mean=float(means["fg_rmse_position"]),
        fg_std=float(stds["fg_rmse_position"]),
        relative_gap=float(
            abs(means["ekf_rmse_position"] - means["fg_rmse_position"])
            / max(means["ekf_rmse_position"], means["fg_rmse_position"], np.finfo(float).tiny)
        ),
    )
    table.loc["mean"] = means
    table.loc["std"] = stds
    return table, summary


def write_table(table: pd.DataFrame, path: Union[str, Path], summary: Optional[Dict] = None) -> None:
    """Delimiter-separated table plus a JSON summary next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, float_format="%.17g")
    if summary is not None:
        path.with_suffix(".json").write_text(json.dumps(summary, indent=2, sort_keys=True))


def reports_table(reports: List[MetricsReport]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in reports])
