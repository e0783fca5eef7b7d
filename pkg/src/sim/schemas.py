from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.common.enums import TrajectoryFamily, YawProfile
from src.measurement.schemas import ProcessNoise

Vec3 = Tuple[float, float, float]


class TrajectorySpec(BaseModel):
    """Analytic trajectory: a path f(θ) about `center` traversed with a time law θ(t)."""

    model_config = ConfigDict(frozen=True)

    family: TrajectoryFamily = TrajectoryFamily.ROUNDED_RECTANGLE
    amplitude: Vec3 = Field((15.0, 15.0, 0.5), description="per-axis path amplitude [m]")
    center: Vec3 = Field((0.0, 0.0, 1.5), description="[m]")
    period: float = Field(60.0, gt=0, description="time of one loop at full rate [s]")
    duration: float = Field(60.0, gt=0, description="[s]")
    hover_time: float = Field(0.0, ge=0, description="static phase before the loop starts [s]")
    ramp_time: float = Field(2.0, gt=0, description="smooth spin-up after the static phase [s]")
    yaw: YawProfile = YawProfile.FIXED
    yaw_initial: float = Field(0.0, description="[rad]")
    yaw_rate: float = Field(0.0, description="[rad/s], rate profile")
    yaw_amplitude: float = Field(0.0, ge=0, description="[rad], sinusoid profile")
    yaw_period: float = Field(10.0, gt=0, description="[s], sinusoid profile")
    roll_amplitude: float = Field(0.0, ge=0, description="[rad]")
    pitch_amplitude: float = Field(0.0, ge=0, description="[rad]")
    excitation_period: float = Field(4.0, gt=0, description="roll/pitch sinusoid period [s]")
    max_speed: float = Field(5.0, gt=0, description="declared speed bound [m/s]")


class NoiseConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    imu: ProcessNoise = Field(default_factory=ProcessNoise)
    accel_bias: Vec3 = Field((0.0, 0.0, 0.0), description="initial b_a [m/s²]")
    gyro_bias: Vec3 = Field((0.0, 0.0, 0.0), description="initial b_ω [rad/s]")
    sigma_range: float = Field(0.05, ge=0, description="[m]")
    sigma_azimuth: float = Field(np.deg2rad(2.0), ge=0, description="[rad]")
    sigma_elevation: float = Field(np.deg2rad(2.0), ge=0, description="[rad]")
    sigma_doppler: float = Field(0.05, ge=0, description="[m/s]")
    detection_probability: float = Field(0.95, ge=0, le=1)
    clutter_rate: float = Field(1.0, ge=0, description="mean clutter points per scan")
    perturb_initial_state: bool = Field(True, description="draw the initial estimate from the initial σ's")

    @classmethod
    def zero(cls) -> "NoiseConfig":
        return cls(
            imu=ProcessNoise(accel_noise=0.0, gyro_noise=0.0, accel_random_walk=0.0, gyro_random_walk=0.0),
            sigma_range=0.0,
            sigma_azimuth=0.0,
            sigma_elevation=0.0,
            sigma_doppler=0.0,
            detection_probability=1.0,
            clutter_rate=0.0,
            perturb_initial_state=False,
        )

    def radar_is_noiseless(self) -> bool:
        return self.sigma_range == 0 and self.sigma_azimuth == 0 and self.sigma_elevation == 0


class RadarSensorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    rate: float = Field(15.0, gt=0, description="[Hz]")
    azimuth_fov: float = Field(np.deg2rad(120.0), gt=0, le=2 * np.pi, description="full width [rad]")
    elevation_fov: float = Field(np.deg2rad(30.0), gt=0, le=np.pi, description="full width [rad]")
    min_range: float = Field(0.3, ge=0, description="[m]")
    max_range: float = Field(10.0, gt=0, description="[m]")
    clutter_max_doppler: float = Field(5.0, ge=0, description="[m/s]")

    @model_validator(mode="after")
    def check_ranges(self):
        if self.min_range >= self.max_range:
            raise ValueError("min_range must be below max_range")
        return self


class WorldConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    n_scatterers: int = Field(6000, ge=0)
    margin: float = Field(6.0, ge=0, description="horizontal padding around the trajectory [m]")
    z_min: float = Field(0.0, description="[m]")
    z_max: float = Field(0.5, description="[m]; clutter lies on the floor under the tilted radar")
    intensity_min: float = Field(5.0, ge=0)
    intensity_max: float = Field(20.0, ge=0)

    @model_validator(mode="after")
    def check_bounds(self):
        if self.z_min > self.z_max or self.intensity_min > self.intensity_max:
            raise ValueError("world bounds are inverted")
        return self
