"""Sliding-window smoother driven by the shared radar front-end."""
import logging
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from src.common.config import RunConfig
from src.common.enums import MeasurementClass
from src.common.errors import ConfigError, DatasetError, StaleCloneError
from src.common.models import Estimate, ImuSample, RadarScan, ScanOutcome
from src.geom.navstate import NAV_DIM, NavState
from src.geom.transforms import Pose
from src.matching.frontend import FrontEnd, FrontEndResult
from src.measurement.models import (
    directions_of,
    inverse_observation,
    predict_distance,
    spherical_covariance,
)
from src.measurement.ransac import fit_ego_velocity
from .factors import (
    DistanceFactor,
    DopplerFactor,
    Factor,
    LandmarkFactor,
    PointObservationFactor,
    PreintegrationFactor,
    PriorFactor,
    landmark_key,
    state_key,
)
from .graph import FactorGraph, LmSummary, solve_lm
from .marginalization import marginalize
from .preintegration import preintegrate

logger = logging.getLogger(__name__)

ANCHOR_ID = -1


@dataclass
class SolveReport:
    t: float
    state_id: int
    added: Dict[str, int] = field(default_factory=dict)      # rows added by this scan, per factor kind
    total: Dict[str, int] = field(default_factory=dict)      # rows in the solved graph, per factor kind
    downweighted: Dict[str, int] = field(default_factory=dict)
    doppler_skipped: str = ""
    lm: LmSummary = field(default_factory=LmSummary)
    n_states: int = 0
    n_landmarks: int = 0
    marginalized: List[Hashable] = field(default_factory=list)


def _rows_by_kind(factors: List[Factor]) -> Dict[str, int]:
    out: Dict[str, int] = {}
    for f in factors:
        out[f.kind] = out.get(f.kind, 0) + len(f)
    return out


def build_graph(
    graph: FactorGraph,
    values: Dict[Hashable, object],
    key: Hashable,
    scan: RadarScan,
    result: FrontEndResult,
    extrinsics: Pose,
    cfg: RunConfig,
    rng: np.random.Generator,
    last_gyro: Optional[np.ndarray] = None,
) -> List[Factor]:
    """Add the radar factors of one scan for state `key`; returns what was added.

    Doppler rows come from RANSAC inliers, one distance row per trail
    history entry and one landmark row per landmark match. Points promoted
    in this scan enter once, as a point observation of their new landmark
    variable, whose initial value is written into `values`. A scan without
    its own gyro reading uses `last_gyro`.
    """
    noise = cfg.measurement
    added: List[Factor] = []
    nav: NavState = values[key]

    directions = directions_of(scan.positions)
    fit = fit_ego_velocity(directions, scan.doppler, cfg.ransac, rng)
    if fit.ok and fit.inliers.any():
        gyro = scan.gyro if scan.gyro is not None else last_gyro
        if gyro is None:
            raise DatasetError(f"scan at t={scan.t} has no gyro reading and no IMU sample precedes it")
        added.append(DopplerFactor(
            key, directions[fit.inliers], scan.doppler[fit.inliers], gyro,
            noise.sigma_doppler, extrinsics, cfg.fg.dcs_doppler,
        ))

    by_clone: Dict[int, List] = {}
    for match in result.distance_matches():
        measured = float(np.linalg.norm(scan.positions[match.point_index]))
        for clone_id, point in match.trail.history:
            by_clone.setdefault(clone_id, []).append((point, measured))
    for clone_id in sorted(by_clone):
        prev_key = state_key(clone_id)
        if prev_key not in values:
            raise StaleCloneError(f"trail entry references state {clone_id} outside the window")
        points = np.array([p for p, _ in by_clone[clone_id]])
        measured = np.array([m for _, m in by_clone[clone_id]])
        prev: NavState = values[prev_key]
        n = len(points)
        _, jac = predict_distance(
            nav.pose(), np.repeat(prev.R[None], n, axis=0), np.repeat(prev.p[None], n, axis=0),
            extrinsics, points,
        )
        variances = np.full(n, noise.sigma_distance**2)
        if noise.point_covariance:
            for k in range(n):
                cov_z = spherical_covariance(points[k], noise.sigma_range, noise.sigma_angle)
                variances[k] += jac.point[k] @ cov_z @ jac.point[k]
        added.append(DistanceFactor(
            key, prev_key, points, measured, np.sqrt(variances), extrinsics, cfg.fg.dcs_distance,
        ))

    if result.landmark_matches:
        added.append(LandmarkFactor(
            key,
            [landmark_key(lid) for _, lid in result.landmark_matches],
            np.array([np.linalg.norm(scan.positions[i]) for i, _ in result.landmark_matches]),
            noise.sigma_landmark,
            extrinsics,
            cfg.fg.dcs_landmark,
        ))

    for promotion in result.promotions:
        point = scan.positions[promotion.point_index]
        lkey = landmark_key(promotion.trail.id)
        values[lkey], _ = inverse_observation(nav.pose(), extrinsics, point)
        cov = spherical_covariance(point, noise.sigma_range, noise.sigma_angle)
        added.append(PointObservationFactor(key, lkey, point, cov, extrinsics))

    graph.extend(added)
    return added


class SlidingWindowSmoother:
    """Fixed-extrinsics smoother over the last `fg.window_size` states.

    An anchor state at the initial time carries the bootstrap prior; each
    radar scan adds one state linked to its predecessor by preintegration.
    """

    def __init__(self, cfg: RunConfig, nav: NavState, t0: float = 0.0, calib: Optional[Pose] = None):
        if cfg.fg.window_size <= cfg.matching.trail_length:
            raise ConfigError(
                f"fg.window_size ({cfg.fg.window_size}) must exceed matching.trail_length "
                f"({cfg.matching.trail_length}) so every trail entry stays in the window"
            )
        self.cfg = cfg
        if cfg.init.velocity_override is not None:
            nav = nav.with_velocity(np.asarray(cfg.init.velocity_override, dtype=float))
        self.extrinsics = calib if calib is not None else cfg.extrinsics.pose()

        anchor = state_key(ANCHOR_ID)
        cov = np.diag(cfg.init.sigma.nav_sigmas() ** 2 * cfg.init.covariance_scale)
        self.values: Dict[Hashable, object] = {anchor: nav}
        self.times: Dict[int, float] = {ANCHOR_ID: t0}
        self.window: List[int] = [ANCHOR_ID]
        self.graph = FactorGraph([PriorFactor.from_covariance(anchor, nav, cov)])

        self.frontend = FrontEnd(cfg.matching)
        self.rng = np.random.default_rng(cfg.seed)
        self.imu: List[ImuSample] = []
        self.last_gyro: Optional[np.ndarray] = None
        self.landmark_last: Dict[int, int] = {}
        self.n_scans = 0
        self.covariance: Optional[np.ndarray] = None

    def on_imu(self, sample: ImuSample) -> None:
        self.imu.append(sample)
        self.last_gyro = sample.gyro

    def _trim_imu(self, t: float) -> None:
        keep = 0
        for k, sample in enumerate(self.imu):
            if sample.t <= t:
                keep = k
        self.imu = self.imu[keep:]

    def _newest_covariance(self, key: Hashable) -> Optional[np.ndarray]:
        system = self.graph.linearize(self.values)
        sl = system.index[key]
        try:
            factor = cho_factor(system.H)
        except LinAlgError:
            logger.warning("window information matrix is singular; no covariance for this scan")
            return None
        cols = np.eye(system.dim)[:, sl]
        return cho_solve(factor, cols)[sl]

    def _marginalize_oldest(self) -> List[Hashable]:
        oldest = self.window.pop(0)
        active = set(self.frontend.landmarks)
        keys: List[Hashable] = [state_key(oldest)]
        for lid, last in sorted(self.landmark_last.items()):
            if last <= oldest and lid not in active:
                keys.append(landmark_key(lid))
                del self.landmark_last[lid]
        marginalize(self.graph, self.values, keys, self.cfg.fg.damping)
        del self.times[oldest]
        return keys

    def on_radar(self, scan: RadarScan) -> ScanOutcome:
        prev_id = self.window[-1]
        prev: NavState = self.values[state_key(prev_id)]
        pim = preintegrate(self.imu, self.times[prev_id], scan.t, prev.ba, prev.bg, self.cfg.imu_noise)
        self._trim_imu(scan.t)

        new_id = self.n_scans
        key = state_key(new_id)
        self.values[key] = pim.predict(prev)
        self.times[new_id] = scan.t
        self.window.append(new_id)
        preint = PreintegrationFactor(state_key(prev_id), key, pim)
        self.graph.add(preint)

        pose_prev = self.values[state_key(new_id - 1)].pose() if new_id > 0 else None
        landmarks = {lid: self.values[landmark_key(lid)] for lid in self.frontend.active_landmarks}
        result = self.frontend.process(scan, new_id, pose_prev, self.values[key].pose(), self.extrinsics, landmarks)
        added = [preint] + build_graph(
            self.graph, self.values, key, scan, result, self.extrinsics, self.cfg, self.rng, self.last_gyro
        )
        for _, lid in result.landmark_matches:
            self.landmark_last[lid] = new_id
        for promotion in result.promotions:
            self.landmark_last[promotion.trail.id] = new_id

        report = SolveReport(t=scan.t, state_id=new_id, added=_rows_by_kind(added))
        if not any(f.kind == MeasurementClass.DOPPLER.value for f in added):
            report.doppler_skipped = "no RANSAC consensus"

        self.values, report.lm = solve_lm(self.graph, self.values, self.cfg.fg)
        report.total = _rows_by_kind(self.graph.factors)
        for f in self.graph.factors:
            if f.kernel is not None:
                r = f.error(self.values)
                n_down = int(np.sum(r**2 > f.kernel))
                report.downweighted[f.kind] = report.downweighted.get(f.kind, 0) + n_down
        self.covariance = self._newest_covariance(key)

        while len(self.window) > self.cfg.fg.window_size:
            report.marginalized.extend(self._marginalize_oldest())

        report.n_states = len(self.window)
        report.n_landmarks = sum(1 for k in self.values if k[0] == "l")
        self.n_scans += 1
        return ScanOutcome(self.estimate(), result, report)

    def estimate(self) -> Estimate:
        newest = self.window[-1]
        nav: NavState = self.values[state_key(newest)]
        return Estimate(
            t=self.times[newest],
            nav=nav,
            calib=self.extrinsics,
            nav_covariance=None if self.covariance is None else self.covariance[:NAV_DIM, :NAV_DIM].copy(),
            n_clones=len(self.window),
            n_landmarks=sum(1 for k in self.values if k[0] == "l"),
        )
