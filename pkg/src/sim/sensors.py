"""Synthetic IMU and radar measurements from ground truth."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from src.common.models import ImuSample, RadarScan, TruthState
from src.common.utils import GRAVITY
from src.geom.transforms import Pose, so3_exp
from .schemas import NoiseConfig, RadarSensorConfig, WorldConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class WorldMap:
    """Static scatterers in the world frame; the row index is the truth id."""

    positions: np.ndarray
    intensity: np.ndarray

    def __len__(self) -> int:
        return len(self.positions)


def gen_world(truth: Sequence[TruthState], cfg: WorldConfig, rng: np.random.Generator) -> WorldMap:
    path = np.array([s.nav.p for s in truth])
    lo = path.min(axis=0) - cfg.margin
    hi = path.max(axis=0) + cfg.margin
    lo[2], hi[2] = cfg.z_min, cfg.z_max
    positions = rng.uniform(lo, hi, size=(cfg.n_scatterers, 3))
    intensity = rng.uniform(cfg.intensity_min, cfg.intensity_max, size=cfg.n_scatterers)
    return WorldMap(positions=positions, intensity=intensity)


def sample_imu(
    truth: Sequence[TruthState],
    noise: NoiseConfig,
    rng: Optional[np.random.Generator] = None,
) -> List[ImuSample]:
    """IMU samples that the midpoint propagation model maps back onto `truth`.

    Sample k drives the interval [t_k, t_k+1]: the gyro reading is the exact
    relative rotation rate, the accelerometer reading reproduces the velocity
    increment through the midpoint attitude.
    """
    rng = rng if rng is not None else np.random.default_rng()
    ba = np.asarray(noise.accel_bias, dtype=float)
    bg = np.asarray(noise.gyro_bias, dtype=float)
    imu = noise.imu

    samples = []
    for k in range(len(truth) - 1):
        a, b = truth[k], truth[k + 1]
        dt = b.t - a.t
        omega = (a.nav.q.inverse() * b.nav.q).log() / dt
        r_mid = a.nav.R @ so3_exp(0.5 * dt * omega)
        accel = r_mid.T @ ((b.nav.v - a.nav.v) / dt - GRAVITY)

        gyro = omega + bg + imu.gyro_noise / np.sqrt(dt) * rng.standard_normal(3)
        accel = accel + ba + imu.accel_noise / np.sqrt(dt) * rng.standard_normal(3)
        samples.append(ImuSample(t=a.t, accel=accel, gyro=gyro))

        bg = bg + imu.gyro_random_walk * np.sqrt(dt) * rng.standard_normal(3)
        ba = ba + imu.accel_random_walk * np.sqrt(dt) * rng.standard_normal(3)
    return samples


def doppler_of(direction: np.ndarray, truth: TruthState, extrinsics: Pose) -> np.ndarray:
    """Range rate of static points along radar-frame unit `direction` rows (closing is negative)."""
    velocity_radar = extrinsics.R.T @ (truth.nav.R.T @ truth.nav.v + np.cross(truth.omega, extrinsics.p))
    return -(direction @ velocity_radar)


def radar_pose(truth: TruthState, extrinsics: Pose) -> Pose:
    return Pose(
        truth.nav.q * extrinsics.rotation,
        truth.nav.p + truth.nav.R @ extrinsics.p,
    )


def _spherical(points: np.ndarray):
    r = np.linalg.norm(points, axis=1)
    az = np.arctan2(points[:, 1], points[:, 0])
    el = np.arcsin(np.clip(points[:, 2] / np.maximum(r, 1e-12), -1.0, 1.0))
    return r, az, el


def _cartesian(r, az, el) -> np.ndarray:
    ce = np.cos(el)
    return np.stack([r * ce * np.cos(az), r * ce * np.sin(az), r * np.sin(el)], axis=1)


def sample_radar(
    truth: TruthState,
    world: WorldMap,
    noise: NoiseConfig,
    sensor: RadarSensorConfig,
    extrinsics: Pose,
    rng: Optional[np.random.Generator] = None,
    gyro: Optional[np.ndarray] = None,
) -> RadarScan:
    rng = rng if rng is not None else np.random.default_rng()
    half_az, half_el = 0.5 * sensor.azimuth_fov, 0.5 * sensor.elevation_fov

    t_gr = radar_pose(truth, extrinsics)
    local = (world.positions - t_gr.p) @ t_gr.R
    r, az, el = _spherical(local)
    visible = (r >= sensor.min_range) & (r <= sensor.max_range) & (np.abs(az) <= half_az) & (np.abs(el) <= half_el)
    detected = visible & (rng.random(len(world)) < noise.detection_probability)
    ids = np.flatnonzero(detected)

    doppler = doppler_of(local[ids] / r[ids, None], truth, extrinsics)
    if noise.radar_is_noiseless():
        positions = local[ids]
    else:
        rr = r[ids] + noise.sigma_range * rng.standard_normal(len(ids))
        aa = np.clip(az[ids] + noise.sigma_azimuth * rng.standard_normal(len(ids)), -half_az, half_az)
        ee = np.clip(el[ids] + noise.sigma_elevation * rng.standard_normal(len(ids)), -half_el, half_el)
        positions = _cartesian(rr, aa, ee)
    doppler = doppler + noise.sigma_doppler * rng.standard_normal(len(ids))
    intensity = world.intensity[ids] / np.maximum(r[ids], 1.0) ** 2

    n_clutter = rng.poisson(noise.clutter_rate) if noise.clutter_rate > 0 else 0
    clutter = _cartesian(
        rng.uniform(sensor.min_range, sensor.max_range, n_clutter),
        rng.uniform(-half_az, half_az, n_clutter),
        rng.uniform(-half_el, half_el, n_clutter),
    )
    clutter_doppler = rng.uniform(-sensor.clutter_max_doppler, sensor.clutter_max_doppler, n_clutter)
    clutter_intensity = rng.uniform(0.0, world.intensity.min(initial=1.0), n_clutter)

    order = rng.permutation(len(ids) + n_clutter)
    return RadarScan(
        t=truth.t,
        positions=np.vstack([positions.reshape(-1, 3), clutter])[order],
        doppler=np.concatenate([doppler, clutter_doppler])[order],
        intensity=np.concatenate([intensity, clutter_intensity])[order],
        truth_ids=np.concatenate([ids, np.full(n_clutter, -1)])[order],
        gyro=gyro,
    )
