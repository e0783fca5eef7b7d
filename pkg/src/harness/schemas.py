"""Line-delimited record formats for datasets and run directories."""
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.common.models import Estimate, ImuSample, RadarScan, TruthState
from src.geom.navstate import NavState
from src.geom.transforms import Pose, Rotation

FORMAT_VERSION = 1

Vec3 = Tuple[float, float, float]
Quat = Tuple[float, float, float, float]


def _vec(x) -> List[float]:
    return [float(v) for v in np.asarray(x).reshape(-1)]


class NavRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: Vec3
    q: Quat = Field(description="Hamilton quaternion, scalar first")
    v: Vec3
    ba: Vec3 = (0.0, 0.0, 0.0)
    bg: Vec3 = (0.0, 0.0, 0.0)

    @classmethod
    def from_nav(cls, nav: NavState) -> "NavRecord":
        return cls(p=_vec(nav.p), q=_vec(nav.q.q), v=_vec(nav.v), ba=_vec(nav.ba), bg=_vec(nav.bg))

    def to_nav(self) -> NavState:
        return NavState(p=self.p, q=Rotation(np.array(self.q)), v=self.v, ba=self.ba, bg=self.bg)


class PoseRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: Vec3
    q: Quat

    @classmethod
    def from_pose(cls, pose: Pose) -> "PoseRecord":
        return cls(p=_vec(pose.p), q=_vec(pose.rotation.q))

    def to_pose(self) -> Pose:
        return Pose(Rotation(np.array(self.q)), np.array(self.p))


class ImuRecord(BaseModel):
    kind: Literal["imu"] = "imu"
    t: float
    accel: Vec3
    gyro: Vec3

    @classmethod
    def from_sample(cls, sample: ImuSample) -> "ImuRecord":
        return cls(t=sample.t, accel=_vec(sample.accel), gyro=_vec(sample.gyro))

    def to_sample(self) -> ImuSample:
        return ImuSample(self.t, np.array(self.accel), np.array(self.gyro))


class RadarRecord(BaseModel):
    kind: Literal["radar"] = "radar"
    t: float
    positions: List[Vec3] = Field(default_factory=list)
    doppler: List[float] = Field(default_factory=list)
    intensity: List[float] = Field(default_factory=list)
    truth_ids: List[int] = Field(default_factory=list)
    gyro: Optional[Vec3] = None

    @classmethod
    def from_scan(cls, scan: RadarScan) -> "RadarRecord":
        return cls(
            t=scan.t,
            positions=[tuple(_vec(p)) for p in scan.positions],
            doppler=_vec(scan.doppler),
            intensity=_vec(scan.intensity),
            truth_ids=[int(i) for i in scan.truth_ids],
            gyro=None if scan.gyro is None else _vec(scan.gyro),
        )

    def to_scan(self) -> RadarScan:
        return RadarScan(
            t=self.t,
            positions=np.array(self.positions, dtype=float).reshape(-1, 3),
            doppler=np.array(self.doppler, dtype=float),
            intensity=np.array(self.intensity, dtype=float),
            truth_ids=np.array(self.truth_ids, dtype=int),
            gyro=None if self.gyro is None else np.array(self.gyro),
        )


class TruthRecord(BaseModel):
    t: float
    nav: NavRecord
    omega: Vec3
    accel: Vec3

    @classmethod
    def from_truth(cls, s: TruthState) -> "TruthRecord":
        return cls(t=s.t, nav=NavRecord.from_nav(s.nav), omega=_vec(s.omega), accel=_vec(s.accel))

    def to_truth(self) -> TruthState:
        return TruthState(self.t, self.nav.to_nav(), np.array(self.omega), np.array(self.accel))


class DatasetManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    run_index: int = 0
    config: Dict = Field(default_factory=dict, description="every resolved SimConfig value")
    initial_state: NavRecord
    initial_time: float = 0.0
    extrinsics: PoseRecord
    path_length: float = 0.0
    files: Dict[str, str] = Field(default_factory=dict, description="file name -> sha256")


class SnapshotRecord(BaseModel):
    t: float
    nav: NavRecord
    calib: PoseRecord
    nav_covariance: Optional[List[List[float]]] = None
    n_clones: int = 0
    n_landmarks: int = 0

    @classmethod
    def from_estimate(cls, e: Estimate) -> "SnapshotRecord":
        return cls(
            t=e.t,
            nav=NavRecord.from_nav(e.nav),
            calib=PoseRecord.from_pose(e.calib),
            nav_covariance=None if e.nav_covariance is None else e.nav_covariance.tolist(),
            n_clones=e.n_clones,
            n_landmarks=e.n_landmarks,
        )

    def to_estimate(self) -> Estimate:
        return Estimate(
            t=self.t,
            nav=self.nav.to_nav(),
            calib=self.calib.to_pose(),
            nav_covariance=None if self.nav_covariance is None else np.array(self.nav_covariance),
            n_clones=self.n_clones,
            n_landmarks=self.n_landmarks,
        )


class ClassRecord(BaseModel):
    offered: int = 0
    accepted: int = 0
    rejected: int = 0
    residuals: List[float] = Field(default_factory=list)
    innovation: List[float] = Field(default_factory=list)
    chi2: List[float] = Field(default_factory=list)
    skipped: str = ""


class ReportRecord(BaseModel):
    """Per-scan backend report; the EKF fills `classes`, the smoother the solve fields."""

    t: float
    backend: str
    classes: Dict[str, ClassRecord] = Field(default_factory=dict)
    rows_added: Dict[str, int] = Field(default_factory=dict)
    rows_total: Dict[str, int] = Field(default_factory=dict)
    downweighted: Dict[str, int] = Field(default_factory=dict)
    iterations: Optional[int] = None
    initial_cost: Optional[float] = None
    final_cost: Optional[float] = None
    converged: Optional[bool] = None
    stop_reason: str = ""


class MatchRecord(BaseModel):
    point: int
    trail: int
    history: List[int] = Field(default_factory=list, description="clone ids of the trail entries")


class FrontEndRecord(BaseModel):
    """Backend-independent decision log for one scan."""

    t: float
    clone_id: int
    landmark_matches: List[Tuple[int, int]] = Field(default_factory=list)
    trail_matches: List[MatchRecord] = Field(default_factory=list)
    new_trails: List[int] = Field(default_factory=list)
    promotions: List[Tuple[int, int]] = Field(default_factory=list, description="(trail id, point index)")
    dropped_landmarks: List[int] = Field(default_factory=list)
    evicted_landmarks: List[int] = Field(default_factory=list)


class FailureRecord(BaseModel):
    kind: Literal["failure"] = "failure"
    t: Optional[float] = None
    error: str
    message: str


class RunManifest(BaseModel):
    format_version: int = FORMAT_VERSION
    backend: str
    config: Dict = Field(default_factory=dict, description="every resolved RunConfig value")
    dataset: str
    dataset_files: Dict[str, str] = Field(default_factory=dict)
    n_scans: int = 0
    failed: bool = False
    files: Dict[str, str] = Field(default_factory=dict)


class PairMatchRecord(BaseModel):
    """Output of the standalone two-scan matcher."""

    pairs: List[Tuple[int, int]]
    unmatched: List[int]
