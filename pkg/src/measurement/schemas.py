from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.common.enums import Frame
from src.geom.transforms import Pose, Rotation

Vec3 = Tuple[float, float, float]


class ProcessNoise(BaseModel):
    """Continuous-time IMU noise densities."""

    model_config = ConfigDict(frozen=True)

    accel_noise: float = Field(0.02, ge=0, description="n_a [m/s²/√Hz]")
    gyro_noise: float = Field(0.002, ge=0, description="n_ω [rad/s/√Hz]")
    accel_random_walk: float = Field(0.001, ge=0, description="n_ba [m/s³/√Hz]")
    gyro_random_walk: float = Field(0.0001, ge=0, description="n_bω [rad/s²/√Hz]")

    def is_zero(self) -> bool:
        return not any(self.model_dump().values())


class ExtrinsicsConfig(BaseModel):
    """Radar mounting relative to the IMU (T_IR)."""

    model_config = ConfigDict(frozen=True)

    rotation_deg: Vec3 = Field((0.0, 45.0, 0.0), description="xyz Euler angles of R_IR [deg]")
    translation: Vec3 = Field((0.075, -0.01, -0.04), description="p_IR [m]")

    def pose(self) -> Pose:
        return Pose(
            Rotation.from_euler("xyz", self.rotation_deg, degrees=True),
            np.asarray(self.translation, dtype=float),
            Frame.IMU,
            Frame.RADAR,
        )

    @classmethod
    def from_pose(cls, pose: Pose) -> "ExtrinsicsConfig":
        return cls(
            rotation_deg=tuple(pose.rotation.as_euler("xyz", degrees=True)),
            translation=tuple(pose.translation),
        )


class InitialUncertainty(BaseModel):
    """One-sigma values of the initial error state."""

    model_config = ConfigDict(frozen=True)

    position: float = Field(0.01, ge=0, description="[m]")
    attitude: float = Field(0.02, ge=0, description="[rad]")
    velocity: float = Field(0.05, ge=0, description="[m/s]")
    accel_bias: float = Field(0.05, ge=0, description="[m/s²]")
    gyro_bias: float = Field(0.005, ge=0, description="[rad/s]")
    calib_position: float = Field(0.05, ge=0, description="[m]")
    calib_attitude: float = Field(0.05, ge=0, description="[rad]")

    def nav_sigmas(self) -> np.ndarray:
        return np.repeat(
            [self.position, self.attitude, self.velocity, self.accel_bias, self.gyro_bias], 3
        ).astype(float)

    def calib_sigmas(self) -> np.ndarray:
        return np.repeat([self.calib_position, self.calib_attitude], 3).astype(float)


class MeasurementNoise(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma_distance: float = Field(0.05, gt=0, description="σ_d [m]")
    sigma_doppler: float = Field(0.05, gt=0, description="σ_v [m/s]")
    sigma_landmark: float = Field(0.05, gt=0, description="σ_d for landmark distances [m]")
    point_covariance: bool = Field(
        True, description="add the reference point's spherical noise to distance variances"
    )
    sigma_range: float = Field(0.05, ge=0, description="[m]")
    sigma_angle: float = Field(np.deg2rad(2.0), ge=0, description="azimuth/elevation [rad]")


class RansacConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(100, ge=1)
    threshold: float = Field(0.15, gt=0, description="inlier bound on |doppler residual| [m/s]")
    min_inliers: int = Field(3, ge=3)
