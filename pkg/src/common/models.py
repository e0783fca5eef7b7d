from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, List, Optional

import numpy as np

from src.geom.navstate import NavState
from src.geom.transforms import Pose

if TYPE_CHECKING:
    from src.matching.frontend import FrontEndResult

NO_TRUTH_ID = -1


@dataclass(frozen=True)
class ImuSample:
    t: float
    accel: np.ndarray
    gyro: np.ndarray


@dataclass(frozen=True)
class RadarPoint:
    position: np.ndarray
    doppler: float
    intensity: float
    truth_id: Optional[int] = None


@dataclass(frozen=True, eq=False)
class RadarScan:
    """Sparse 4D point cloud in the radar frame, stored column-wise."""

    t: float
    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    doppler: np.ndarray = field(default_factory=lambda: np.zeros(0))
    intensity: np.ndarray = field(default_factory=lambda: np.zeros(0))
    truth_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    gyro: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float).reshape(-1, 3))
        n = len(self.positions)
        for name in ("doppler", "intensity"):
            values = np.asarray(getattr(self, name), dtype=float)
            # omitted columns default to zeros
            object.__setattr__(self, name, np.zeros(n) if values.size == 0 else values.reshape(n))
        ids = self.truth_ids if len(self.truth_ids) == n else np.full(n, NO_TRUTH_ID)
        object.__setattr__(self, "truth_ids", np.asarray(ids, dtype=int).reshape(n))

    def __len__(self) -> int:
        return len(self.positions)

    @classmethod
    def from_points(cls, t: float, points: List[RadarPoint], gyro: Optional[np.ndarray] = None) -> "RadarScan":
        if not points:
            return cls(t=t, gyro=gyro)
        return cls(
            t=t,
            positions=np.array([p.position for p in points]),
            doppler=np.array([p.doppler for p in points]),
            intensity=np.array([p.intensity for p in points]),
            truth_ids=np.array([NO_TRUTH_ID if p.truth_id is None else p.truth_id for p in points]),
            gyro=gyro,
        )

    def points(self) -> List[RadarPoint]:
        return [
            RadarPoint(
                position=self.positions[i],
                doppler=float(self.doppler[i]),
                intensity=float(self.intensity[i]),
                truth_id=None if self.truth_ids[i] == NO_TRUTH_ID else int(self.truth_ids[i]),
            )
            for i in range(len(self))
        ]

    def ranges(self) -> np.ndarray:
        return np.linalg.norm(self.positions, axis=1)

    def subset(self, idx) -> "RadarScan":
        idx = np.asarray(idx, dtype=int)
        return RadarScan(
            t=self.t,
            positions=self.positions[idx],
            doppler=self.doppler[idx],
            intensity=self.intensity[idx],
            truth_ids=self.truth_ids[idx],
            gyro=self.gyro,
        )


@dataclass(frozen=True)
class TruthState:
    """Dense ground truth at one instant; angular rate and acceleration in body/world frames."""

    t: float
    nav: NavState
    omega: np.ndarray
    accel: np.ndarray


@dataclass(frozen=True, eq=False)
class Estimate:
    """Backend output after one radar scan."""

    t: float
    nav: NavState
    calib: Pose
    nav_covariance: Optional[np.ndarray] = None
    n_clones: int = 0
    n_landmarks: int = 0

    @property
    def position_covariance(self) -> Optional[np.ndarray]:
        return None if self.nav_covariance is None else self.nav_covariance[0:3, 0:3]


@dataclass(frozen=True, eq=False)
class ScanOutcome:
    """Everything a backend produced for one radar scan."""

    estimate: Estimate
    frontend: "FrontEndResult"
    report: Any
