"""Multi-state error-state EKF: propagation, stochastic cloning and radar updates."""
import logging
from dataclasses import replace
from typing import Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from src.common.enums import CalibrationMode, MeasurementClass
from src.common.errors import DegenerateGeometryError, StaleCloneError
from src.common.models import ImuSample, RadarScan
from src.common.utils import GRAVITY, chi2_threshold, require_finite, symmetrize
from src.geom.navstate import BA, BG, NAV_DIM, NavState, P, TH, V
from src.geom.transforms import Pose, Rotation, right_jacobian, skew, so3_exp
from src.matching.frontend import TrailMatch
from src.measurement.models import (
    directions_of,
    inverse_observation,
    predict_distance,
    predict_doppler,
    predict_landmark,
    spherical_covariance,
)
from src.measurement.ransac import fit_ego_velocity
from src.measurement.schemas import InitialUncertainty, MeasurementNoise, ProcessNoise, RansacConfig
from .state import CALIB, CLONE_DIM, LANDMARK_DIM, ClassReport, Clone, FilterState, Landmark

logger = logging.getLogger(__name__)


def initial_state(
    nav: NavState,
    calib: Pose,
    sigma: InitialUncertainty,
    calibration: CalibrationMode = CalibrationMode.ONLINE,
    t: float = 0.0,
    scale: float = 1.0,
) -> FilterState:
    variances = np.concatenate([sigma.nav_sigmas(), sigma.calib_sigmas()]) ** 2 * scale
    if calibration == CalibrationMode.FIXED:
        variances[CALIB] = 0.0
    return FilterState(t=t, nav=nav, calib=calib, covariance=np.diag(variances))


def transition(
    nav: NavState, imu: ImuSample, dt: float, gravity: np.ndarray = GRAVITY
) -> Tuple[NavState, np.ndarray]:
    """Midpoint integration of the nominal state and its exact error transition Φ."""
    w = imu.gyro - nav.bg
    a = imu.accel - nav.ba
    rot = nav.R
    d_rot = so3_exp(w * dt)
    d_half = so3_exp(0.5 * w * dt)
    r_mid = rot @ d_half
    acc = r_mid @ a + gravity

    nxt = NavState(
        p=nav.p + nav.v * dt + 0.5 * acc * dt**2,
        q=nav.q * Rotation.from_rotvec(w * dt),
        v=nav.v + acc * dt,
        ba=nav.ba,
        bg=nav.bg,
    )

    ra = r_mid @ skew(a)
    jr_half = right_jacobian(0.5 * w * dt)
    phi = np.eye(NAV_DIM)
    phi[TH, TH] = d_rot.T
    phi[TH, BG] = -right_jacobian(w * dt) * dt
    phi[V, TH] = -dt * ra @ d_half.T
    phi[V, BA] = -dt * r_mid
    phi[V, BG] = dt * ra @ jr_half * (0.5 * dt)
    phi[P, TH] = 0.5 * dt * phi[V, TH]
    phi[P, V] = np.eye(3) * dt
    phi[P, BA] = 0.5 * dt * phi[V, BA]
    phi[P, BG] = 0.5 * dt * phi[V, BG]
    return nxt, phi


def propagate(state: FilterState, imu: ImuSample, dt: float, noise: ProcessNoise) -> FilterState:
    """Σ_nav ← ΦΣ_navΦᵀ + Q, Σ_nav,rest ← ΦΣ_nav,rest; every other block is untouched."""
    require_finite("IMU sample", imu.accel, imu.gyro, dt)
    if dt <= 0.0:
        raise ValueError(f"propagation step must be positive, got {dt}")
    nav, phi = transition(state.nav, imu, dt)

    q = np.zeros((NAV_DIM, NAV_DIM))
    g_a, g_g = phi[:, BA], phi[:, BG]
    q += (noise.accel_noise**2 / dt) * g_a @ g_a.T
    q += (noise.gyro_noise**2 / dt) * g_g @ g_g.T
    q[BA, BA] += np.eye(3) * noise.accel_random_walk**2 * dt
    q[BG, BG] += np.eye(3) * noise.gyro_random_walk**2 * dt

    cov = state.covariance.copy()
    cov[:NAV_DIM, :NAV_DIM] = symmetrize(phi @ cov[:NAV_DIM, :NAV_DIM] @ phi.T + q)
    cov[:NAV_DIM, NAV_DIM:] = phi @ state.covariance[:NAV_DIM, NAV_DIM:]
    cov[NAV_DIM:, :NAV_DIM] = cov[:NAV_DIM, NAV_DIM:].T
    return replace(state, t=state.t + dt, nav=nav, covariance=cov)


def _drop_rows(cov: np.ndarray, start: int, size: int) -> np.ndarray:
    keep = np.r_[0:start, start + size:cov.shape[0]]
    return cov[np.ix_(keep, keep)]


def clone(state: FilterState, t: float, clone_id: int, max_clones: int) -> FilterState:
    """Append a copy of the current IMU pose; its rows/cols copy the pose block exactly."""
    base = state.landmark_base
    dim = state.dim
    order = np.r_[0:base, 0:CLONE_DIM, base:dim]
    cov = state.covariance[np.ix_(order, order)]
    clones = state.clones + [Clone(clone_id, t, state.nav.pose())]
    out = replace(state, covariance=cov, clones=clones)

    while len(out.clones) > max_clones:
        cov = _drop_rows(out.covariance, out.clone_offset(0), CLONE_DIM)
        out = replace(out, covariance=cov, clones=out.clones[1:])
    return out


def remove_landmarks(state: FilterState, ids: Sequence[int]) -> FilterState:
    ids = set(ids)
    out = state
    for lm in state.landmarks:
        if lm.id in ids:
            cov = _drop_rows(out.covariance, out.landmark_slice(lm.id).start, LANDMARK_DIM)
            out = replace(out, covariance=cov, landmarks=[x for x in out.landmarks if x.id != lm.id])
    return out


def chi2_gate(residual: np.ndarray, innovation: np.ndarray, dof: int, percentile: float) -> Tuple[bool, float]:
    """Accept iff rᵀS⁻¹r ≤ χ²_dof(percentile); a singular S is rejected."""
    r = np.atleast_1d(np.asarray(residual, dtype=float))
    s = np.atleast_2d(np.asarray(innovation, dtype=float))
    try:
        factor = cho_factor(s)
    except LinAlgError:
        return False, float("inf")
    gamma = float(r @ cho_solve(factor, r))
    return gamma <= chi2_threshold(dof, percentile), gamma


def ekf_update(state: FilterState, h: np.ndarray, residual: np.ndarray, noise_cov: np.ndarray) -> FilterState:
    """Stacked update in Joseph form, then correction injection."""
    cov = state.covariance
    s = symmetrize(h @ cov @ h.T + noise_cov)
    gain = np.linalg.solve(s, h @ cov).T
    i_kh = np.eye(state.dim) - gain @ h
    cov = symmetrize(i_kh @ cov @ i_kh.T + gain @ noise_cov @ gain.T)
    return state.inject(gain @ residual).with_covariance(cov)


def gate_rows(
    state: FilterState,
    h: np.ndarray,
    residual: np.ndarray,
    variances: np.ndarray,
    percentile: float,
    report: ClassReport,
) -> np.ndarray:
    """Per-scalar χ² gate against the current covariance; returns the accepted mask."""
    report.offered += len(residual)
    if len(residual) == 0:
        return np.zeros(0, dtype=bool)
    innovation = np.einsum("ij,jk,ik->i", h, state.covariance, h) + variances
    accept = np.zeros(len(residual), dtype=bool)
    for k in range(len(residual)):
        accept[k], gamma = chi2_gate(residual[k], innovation[k], 1, percentile)
        report.chi2.append(gamma)
    report.residuals.extend(float(r) for r in residual)
    report.innovation.extend(float(s) for s in innovation)
    report.accepted += int(accept.sum())
    report.rejected += int((~accept).sum())
    logger.debug("%s: %d/%d accepted", report.measurement_class.value, accept.sum(), len(residual))
    return accept


def gated_update(
    state: FilterState,
    h: np.ndarray,
    residual: np.ndarray,
    variances: np.ndarray,
    percentile: float,
    report: ClassReport,
) -> FilterState:
    """Per-scalar χ² gate, then one stacked update with the accepted rows."""
    accept = gate_rows(state, h, residual, variances, percentile, report)
    if not accept.any():
        return state
    return ekf_update(state, h[accept], residual[accept], np.diag(variances[accept]))


Rows = Tuple[np.ndarray, np.ndarray, np.ndarray]


def distance_rows(
    state: FilterState,
    trail_matches: Sequence[TrailMatch],
    scan: RadarScan,
    noise: MeasurementNoise,
) -> Rows:
    """One scalar per trail history entry: measured ‖z_curr‖ against the aligned trail point."""
    rows, residuals, variances = [], [], []
    curr = state.nav.pose()
    for match in trail_matches:
        measured = float(np.linalg.norm(scan.positions[match.point_index]))
        for clone_id, point in match.trail.history:
            try:
                clone_pose = state.clone_pose(clone_id)
            except KeyError:
                raise StaleCloneError(f"trail {match.trail.id} references evicted clone {clone_id}") from None
            try:
                d, jac = predict_distance(curr, clone_pose.R[None], clone_pose.p[None], state.calib, point[None])
            except DegenerateGeometryError:
                logger.warning("skipping degenerate distance on trail %d", match.trail.id)
                continue
            row = np.zeros(state.dim)
            row[0:6] += jac.curr[0]
            row[state.clone_slice(clone_id)] += jac.prev[0]
            row[CALIB] += jac.calib[0]
            var = noise.sigma_distance**2
            if noise.point_covariance:
                cov_z = spherical_covariance(point, noise.sigma_range, noise.sigma_angle)
                var += float(jac.point[0] @ cov_z @ jac.point[0])
            rows.append(row)
            residuals.append(measured - d[0])
            variances.append(var)
    return np.array(rows).reshape(-1, state.dim), np.array(residuals), np.array(variances)


def update_distance_trails(
    state: FilterState,
    trail_matches: Sequence[TrailMatch],
    scan: RadarScan,
    noise: MeasurementNoise,
    percentile: float = 0.95,
) -> Tuple[FilterState, ClassReport]:
    report = ClassReport(MeasurementClass.DISTANCE)
    h, residual, variances = distance_rows(state, trail_matches, scan, noise)
    state = gated_update(state, h, residual, variances, percentile, report)
    return state, report


def update_doppler(
    state: FilterState,
    scan: RadarScan,
    omega: np.ndarray,
    noise: MeasurementNoise,
    ransac: RansacConfig,
    rng: np.random.Generator,
    percentile: float = 0.95,
) -> Tuple[FilterState, ClassReport]:
    """RANSAC-pruned scalar Doppler updates; `omega` is the bias-corrected gyro rate."""
    report = ClassReport(MeasurementClass.DOPPLER)
    directions = directions_of(scan.positions)
    fit = fit_ego_velocity(directions, scan.doppler, ransac, rng)
    if not fit.ok:
        report.skipped = fit.skipped
        report.offered = len(scan)
        report.rejected = len(scan)
        return state, report

    rejected_by_ransac = int((~fit.inliers).sum())
    predicted, jac = predict_doppler(state.nav.R, state.nav.v, state.calib, omega, directions[fit.inliers])
    h = np.zeros((len(predicted), state.dim))
    h[:, V] = jac.velocity
    h[:, TH] = jac.attitude
    h[:, BG] = -jac.omega
    h[:, CALIB] = jac.calib
    residual = scan.doppler[fit.inliers] - predicted
    variances = np.full(len(residual), noise.sigma_doppler**2)
    state = gated_update(state, h, residual, variances, percentile, report)
    report.offered += rejected_by_ransac
    report.rejected += rejected_by_ransac
    return state, report


def init_landmark(state: FilterState, landmark_id: int, point: np.ndarray, point_cov: np.ndarray) -> FilterState:
    """Augment with l = R_GI(R_IR z + p_IR) + p_GI and its cross-covariance."""
    position, jac = inverse_observation(state.nav.pose(), state.calib, point)
    h_x = np.zeros((3, state.dim))
    h_x[:, 0:6] = jac.curr
    h_x[:, CALIB] = jac.calib

    cov = state.covariance
    cross = h_x @ cov
    block = symmetrize(cross @ h_x.T + jac.point @ point_cov @ jac.point.T)
    out = np.block([[cov, cross.T], [cross, block]])
    return replace(
        state,
        covariance=out,
        landmarks=state.landmarks + [Landmark(landmark_id, position)],
    )


def landmark_rows(
    state: FilterState,
    scan: RadarScan,
    matches: Sequence[Tuple[int, int]],
    sigma: float,
    report: ClassReport,
) -> Rows:
    """One distance row per matched landmark; degenerate ones count as rejected."""
    rows, residuals = [], []
    curr = state.nav.pose()
    positions = state.landmark_positions()
    for point, lid in matches:
        try:
            d, jac = predict_landmark(curr, state.calib, positions[lid][None])
        except DegenerateGeometryError:
            logger.warning("landmark %d sits on the radar origin; skipped", lid)
            report.offered += 1
            report.rejected += 1
            continue
        row = np.zeros(state.dim)
        row[0:6] = jac.curr[0]
        row[CALIB] = jac.calib[0]
        row[state.landmark_slice(lid)] = jac.landmark[0]
        rows.append(row)
        residuals.append(float(np.linalg.norm(scan.positions[point])) - d[0])
    return np.array(rows).reshape(-1, state.dim), np.array(residuals), np.full(len(residuals), sigma**2)


def _keep_matched(state: FilterState, matches: Sequence[Tuple[int, int]]) -> FilterState:
    matched = {lid for _, lid in matches}
    return remove_landmarks(state, [lm.id for lm in state.landmarks if lm.id not in matched])


def update_landmarks(
    state: FilterState,
    scan: RadarScan,
    matches: Sequence[Tuple[int, int]],
    sigma: float,
    percentile: float = 0.95,
) -> Tuple[FilterState, ClassReport]:
    """Distance updates for matched landmarks; unmatched landmarks leave the state."""
    report = ClassReport(MeasurementClass.LANDMARK)
    h, residual, variances = landmark_rows(state, scan, matches, sigma, report)
    state = gated_update(state, h, residual, variances, percentile, report)
    return _keep_matched(state, matches), report


def update_trails_and_landmarks(
    state: FilterState,
    trail_matches: Sequence[TrailMatch],
    landmark_matches: Sequence[Tuple[int, int]],
    scan: RadarScan,
    noise: MeasurementNoise,
    percentile: float = 0.95,
) -> Tuple[FilterState, ClassReport, ClassReport]:
    """Trail and landmark rows, gated per class against one prior, applied as a single update."""
    distance = ClassReport(MeasurementClass.DISTANCE)
    landmark = ClassReport(MeasurementClass.LANDMARK)
    h_d, r_d, var_d = distance_rows(state, trail_matches, scan, noise)
    h_l, r_l, var_l = landmark_rows(state, scan, landmark_matches, noise.sigma_landmark, landmark)
    accept = np.concatenate([
        gate_rows(state, h_d, r_d, var_d, percentile, distance),
        gate_rows(state, h_l, r_l, var_l, percentile, landmark),
    ])
    if accept.any():
        h = np.vstack([h_d, h_l])[accept]
        residual = np.concatenate([r_d, r_l])[accept]
        variances = np.concatenate([var_d, var_l])[accept]
        state = ekf_update(state, h, residual, np.diag(variances))
    return _keep_matched(state, landmark_matches), distance, landmark
