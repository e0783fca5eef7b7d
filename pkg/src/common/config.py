"""Run and simulation settings.

Config files are flat dotted key-value text read with python-dotenv:

    backend = fg
    matching.max_landmarks = 20
    extrinsics.rotation_deg = [0, 45, 0]

Values are decoded as JSON when possible and kept as strings otherwise.
Environment variables (RIO_ / RIO_SIM_ prefix, `__` between sections)
override defaults; file values override both.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Type, TypeVar, Union

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.ekf.schemas import EkfConfig
from src.fg.schemas import FgConfig
from src.matching.schemas import MatchingConfig
from src.measurement.schemas import (
    ExtrinsicsConfig,
    InitialUncertainty,
    MeasurementNoise,
    ProcessNoise,
    RansacConfig,
)
from src.sim.schemas import NoiseConfig, RadarSensorConfig, TrajectorySpec, WorldConfig
from .enums import Backend
from .errors import ConfigError

logger = logging.getLogger(__name__)

Settings = TypeVar("Settings", bound=BaseSettings)


class InitConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: InitialUncertainty = Field(default_factory=InitialUncertainty)
    covariance_scale: float = Field(1.0, gt=0, description="multiplies every initial variance")
    velocity_override: Optional[Tuple[float, float, float]] = Field(
        None, description="replace the initial velocity estimate [m/s]"
    )


class RunConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="RIO_", env_nested_delimiter="__", frozen=True)

    backend: Backend = Backend.EKF
    seed: int = Field(0, ge=0, description="RANSAC sampling seed")
    matching: MatchingConfig = Field(default_factory=MatchingConfig)
    ekf: EkfConfig = Field(default_factory=EkfConfig)
    fg: FgConfig = Field(default_factory=FgConfig)
    ransac: RansacConfig = Field(default_factory=RansacConfig)
    imu_noise: ProcessNoise = Field(default_factory=ProcessNoise)
    measurement: MeasurementNoise = Field(default_factory=MeasurementNoise)
    init: InitConfig = Field(default_factory=InitConfig)
    extrinsics: ExtrinsicsConfig = Field(default_factory=ExtrinsicsConfig)


class SimConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="RIO_SIM_", env_nested_delimiter="__", frozen=True)

    seed: int = Field(0, ge=0)
    n_runs: int = Field(1, ge=1)
    imu_rate: float = Field(200.0, gt=0, description="[Hz]")
    trajectory: TrajectorySpec = Field(default_factory=TrajectorySpec)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)
    radar: RadarSensorConfig = Field(default_factory=RadarSensorConfig)
    world: WorldConfig = Field(default_factory=WorldConfig)
    extrinsics: ExtrinsicsConfig = Field(default_factory=ExtrinsicsConfig)
    init: InitialUncertainty = Field(default_factory=InitialUncertainty)

    @property
    def radar_period(self) -> int:
        """Radar period in IMU samples; radar stamps coincide with IMU stamps."""
        return max(1, int(round(self.imu_rate / self.radar.rate)))


def _decode(raw: str) -> Any:
    try:
        return json.loads(raw)
    except (TypeError, ValueError):
        return raw


def unflatten(flat: Dict[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        *parents, leaf = key.split(".")
        node = nested
        for part in parents:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"'{key}' nests under a plain value")
        node[leaf] = value
    return nested


def flatten(data: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat: Dict[str, Any] = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Optional[Union[str, Path]] = None,
    cls: Type[Settings] = RunConfig,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    values: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        raw = dotenv_values(path)
        values = unflatten({k: _decode(v) for k, v in raw.items() if v is not None})
    if overrides:
        values = merge(values, overrides)

    try:
        cfg = cls(**values)
    except ValidationError as e:
        raise ConfigError(f"invalid {cls.__name__}: {e}") from e
    logger.debug("loaded %s from %s", cls.__name__, path or "defaults")
    return cfg


def write_config(path: Union[str, Path], cfg: BaseSettings) -> None:
    lines = [f"{key} = {json.dumps(value)}" for key, value in flatten(cfg.model_dump(mode="json")).items()]
    Path(path).write_text("\n".join(lines) + "\n")
