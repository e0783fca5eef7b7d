"""Radar measurement models shared by the filter and the smoother.

All Jacobians are with respect to right-perturbed poses, ordered
[δp, δθ] for IMU poses and [δp_IR, δθ_IR] for the extrinsics. Batched
functions take one row per measurement and return one Jacobian row each.
"""
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.common.errors import DegenerateGeometryError
from src.geom.transforms import Pose, skew

MIN_DISTANCE = 1e-9


@dataclass(frozen=True, eq=False)
class DistanceJacobians:
    curr: np.ndarray   # (n, 6)
    prev: np.ndarray   # (n, 6)
    calib: np.ndarray  # (n, 6)
    point: np.ndarray  # (n, 3)


@dataclass(frozen=True, eq=False)
class LandmarkJacobians:
    curr: np.ndarray      # (n, 6)
    calib: np.ndarray     # (n, 6)
    landmark: np.ndarray  # (n, 3)


@dataclass(frozen=True, eq=False)
class DopplerJacobians:
    velocity: np.ndarray  # (n, 3)
    attitude: np.ndarray  # (n, 3)
    calib: np.ndarray     # (n, 6)
    omega: np.ndarray     # (n, 3), w.r.t. the angular rate; the gyro bias enters with a minus sign


@dataclass(frozen=True, eq=False)
class InverseJacobians:
    curr: np.ndarray   # (3, 6)
    calib: np.ndarray  # (3, 6)
    point: np.ndarray  # (3, 3)


def _unit(vectors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    d = np.linalg.norm(vectors, axis=1)
    if np.any(d < MIN_DISTANCE):
        raise DegenerateGeometryError("point coincides with the radar origin; distance Jacobian is undefined")
    return d, vectors / d[:, None]


def predict_distance(
    curr: Pose,
    prev_rot: np.ndarray,
    prev_pos: np.ndarray,
    extrinsics: Pose,
    points: np.ndarray,
) -> Tuple[np.ndarray, DistanceJacobians]:
    """‖p′‖ for trail points `points` seen from poses (prev_rot[k], prev_pos[k]).

    p′ = R_IRᵀ(R_cᵀ(−p_c + p_p + R_p(p_IR + R_IR z)) − p_IR)
    """
    r_c, p_c = curr.R, curr.p
    r_ir, p_ir = extrinsics.R, extrinsics.p
    prev_rot = np.asarray(prev_rot).reshape(-1, 3, 3)
    prev_pos = np.asarray(prev_pos).reshape(-1, 3)
    z = np.asarray(points, dtype=float).reshape(-1, 3)

    w = p_ir + z @ r_ir.T
    u = prev_pos - p_c + np.einsum("nij,nj->ni", prev_rot, w)
    cu = u @ r_c
    aligned = (cu - p_ir) @ r_ir
    d, n = _unit(aligned)

    a = r_ir.T @ r_c.T
    na = n @ a
    m1 = n @ r_ir.T
    q = np.einsum("ni,nij->nj", na, prev_rot)
    qr = q @ r_ir

    jac = DistanceJacobians(
        curr=np.hstack([-na, np.cross(m1, cu)]),
        prev=np.hstack([na, -np.cross(q, w)]),
        calib=np.hstack([q - m1, -np.cross(qr, z)]),
        point=qr,
    )
    return d, jac


def predict_landmark(curr: Pose, extrinsics: Pose, landmarks: np.ndarray) -> Tuple[np.ndarray, LandmarkJacobians]:
    """‖R_IRᵀ(R_GIᵀ(l − p_GI) − p_IR)‖ per landmark row."""
    r_c, p_c = curr.R, curr.p
    r_ir, p_ir = extrinsics.R, extrinsics.p
    g = (np.asarray(landmarks, dtype=float).reshape(-1, 3) - p_c) @ r_c
    local = (g - p_ir) @ r_ir
    d, n = _unit(local)

    na = n @ (r_ir.T @ r_c.T)
    m1 = n @ r_ir.T
    jac = LandmarkJacobians(
        curr=np.hstack([-na, np.cross(m1, g)]),
        calib=np.hstack([-m1, np.zeros_like(m1)]),
        landmark=na,
    )
    return d, jac


def predict_doppler(
    rotation: np.ndarray,
    velocity: np.ndarray,
    extrinsics: Pose,
    omega: np.ndarray,
    directions: np.ndarray,
) -> Tuple[np.ndarray, DopplerJacobians]:
    """Range rate of static points along unit radar-frame `directions`.

    h = −r̂ᵀR_IRᵀ(R_GIᵀv + ω × p_IR); closing points are negative.
    """
    r_ir, p_ir = extrinsics.R, extrinsics.p
    dirs = np.asarray(directions, dtype=float).reshape(-1, 3)
    body_v = rotation.T @ velocity
    moving = body_v + np.cross(omega, p_ir)
    radar_v = r_ir.T @ moving

    k = dirs @ r_ir.T
    jac = DopplerJacobians(
        velocity=-(k @ rotation.T),
        attitude=-np.cross(k, body_v),
        calib=np.hstack([-np.cross(k, omega), -np.cross(dirs, radar_v)]),
        omega=k @ skew(p_ir),
    )
    return -(dirs @ radar_v), jac


def inverse_observation(curr: Pose, extrinsics: Pose, point: np.ndarray) -> Tuple[np.ndarray, InverseJacobians]:
    """World position of a radar-frame point: R_GI(R_IR z + p_IR) + p_GI."""
    r_c = curr.R
    r_ir, p_ir = extrinsics.R, extrinsics.p
    in_imu = r_ir @ point + p_ir
    jac = InverseJacobians(
        curr=np.hstack([np.eye(3), -r_c @ skew(in_imu)]),
        calib=np.hstack([r_c, -r_c @ r_ir @ skew(point)]),
        point=r_c @ r_ir,
    )
    return r_c @ in_imu + curr.p, jac


def spherical_covariance(point: np.ndarray, sigma_range: float, sigma_angle: float) -> np.ndarray:
    """Cartesian covariance of a point measured with independent range/azimuth/elevation noise."""
    x, y, z = point
    r = np.linalg.norm(point)
    if r < MIN_DISTANCE:
        return np.eye(3) * sigma_range**2
    az = np.arctan2(y, x)
    el = np.arcsin(np.clip(z / r, -1.0, 1.0))
    ca, sa, ce, se = np.cos(az), np.sin(az), np.cos(el), np.sin(el)
    jac = np.array([
        [ce * ca, -r * ce * sa, -r * se * ca],
        [ce * sa, r * ce * ca, -r * se * sa],
        [se, 0.0, r * ce],
    ])
    return jac @ np.diag([sigma_range**2, sigma_angle**2, sigma_angle**2]) @ jac.T


def directions_of(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(pts, axis=1)
    return pts / np.maximum(norms, MIN_DISTANCE)[:, None]
