import logging
from typing import Optional

import numpy as np

from src.common.config import RunConfig
from src.common.enums import MeasurementClass
from src.common.errors import DatasetError
from src.common.models import Estimate, ImuSample, RadarScan, ScanOutcome
from src.geom.navstate import NAV_DIM, NavState
from src.geom.transforms import Pose
from src.matching.frontend import FrontEnd
from src.measurement.models import spherical_covariance
from .filter import (
    clone,
    init_landmark,
    initial_state,
    propagate,
    remove_landmarks,
    update_distance_trails,
    update_doppler,
    update_landmarks,
    update_trails_and_landmarks,
)
from .state import FilterState, UpdateReport

logger = logging.getLogger(__name__)


class MultiStateEkf:
    """Event-driven filter: feed IMU samples and radar scans in time order.

    The clone buffer holds `matching.trail_length` poses, so a trail length
    of one with landmarks disabled is the single-clone filter.
    """

    def __init__(self, cfg: RunConfig, nav: NavState, t0: float = 0.0, calib: Optional[Pose] = None):
        self.cfg = cfg
        if cfg.init.velocity_override is not None:
            nav = nav.with_velocity(np.asarray(cfg.init.velocity_override, dtype=float))
        self.state = initial_state(
            nav,
            calib if calib is not None else cfg.extrinsics.pose(),
            cfg.init.sigma,
            cfg.ekf.calibration,
            t=t0,
            scale=cfg.init.covariance_scale,
        )
        self.frontend = FrontEnd(cfg.matching)
        self.rng = np.random.default_rng(cfg.seed)
        self.last_imu: Optional[ImuSample] = None
        self.n_scans = 0

    def _advance(self, t: float) -> None:
        dt = t - self.state.t
        if dt <= 0.0 or self.last_imu is None:
            return
        self.state = propagate(self.state, self.last_imu, dt, self.cfg.imu_noise)

    def on_imu(self, sample: ImuSample) -> None:
        self._advance(sample.t)
        self.last_imu = sample

    def _last_gyro(self, scan: RadarScan) -> np.ndarray:
        if self.last_imu is None:
            raise DatasetError(f"scan at t={scan.t} has no gyro reading and no IMU sample precedes it")
        return self.last_imu.gyro

    def on_radar(self, scan: RadarScan) -> ScanOutcome:
        self._advance(scan.t)
        state = self.state
        clone_id = self.n_scans
        pose_prev = state.clones[-1].pose if state.clones else None
        result = self.frontend.process(
            scan, clone_id, pose_prev, state.nav.pose(), state.calib, state.landmark_positions()
        )

        percentile = self.cfg.ekf.chi2_percentile
        noise = self.cfg.measurement
        report = UpdateReport(t=scan.t)
        joint_pending = self.cfg.ekf.joint_trail_landmark
        for kind in self.cfg.ekf.update_order:
            if self.cfg.ekf.joint_trail_landmark and kind != MeasurementClass.DOPPLER:
                if joint_pending:
                    state, distance, landmark = update_trails_and_landmarks(
                        state, result.distance_matches(), result.landmark_matches, scan, noise, percentile
                    )
                    report.add(distance)
                    report.add(landmark)
                    joint_pending = False
                continue
            if kind == MeasurementClass.DISTANCE:
                state, part = update_distance_trails(state, result.distance_matches(), scan, noise, percentile)
            elif kind == MeasurementClass.DOPPLER:
                gyro = scan.gyro if scan.gyro is not None else self._last_gyro(scan)
                state, part = update_doppler(
                    state, scan, gyro - state.nav.bg, noise, self.cfg.ransac, self.rng, percentile
                )
            else:
                state, part = update_landmarks(
                    state, scan, result.landmark_matches, noise.sigma_landmark, percentile
                )
            report.add(part)

        state = remove_landmarks(state, result.evicted_landmarks)
        state = clone(state, scan.t, clone_id, self.cfg.matching.trail_length)
        for promotion in result.promotions:
            point = scan.positions[promotion.point_index]
            cov = spherical_covariance(point, noise.sigma_range, noise.sigma_angle)
            state = init_landmark(state, promotion.trail.id, point, cov)

        self.state = state
        self.n_scans += 1
        return ScanOutcome(self.estimate(), result, report)

    def estimate(self) -> Estimate:
        s: FilterState = self.state
        return Estimate(
            t=s.t,
            nav=s.nav,
            calib=s.calib,
            nav_covariance=s.covariance[:NAV_DIM, :NAV_DIM].copy(),
            n_clones=len(s.clones),
            n_landmarks=len(s.landmarks),
        )
