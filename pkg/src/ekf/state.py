"""Filter state containers.

Error-state ordering: [nav (15) | calib (6) | clones (6 each) | landmarks (3 each)],
nav = [δp, δθ, δv, δb_a, δb_ω], calib = [δp_IR, δθ_IR], clone = [δp, δθ].
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List

import numpy as np

from src.common.enums import MeasurementClass
from src.geom.navstate import NAV_DIM, NavState
from src.geom.transforms import Pose

CALIB_DIM = 6
CLONE_DIM = 6
LANDMARK_DIM = 3
CALIB = slice(NAV_DIM, NAV_DIM + CALIB_DIM)
POSE = slice(0, 6)


@dataclass(frozen=True, eq=False)
class Clone:
    id: int
    t: float
    pose: Pose


@dataclass(frozen=True, eq=False)
class Landmark:
    id: int
    position: np.ndarray


@dataclass(frozen=True, eq=False)
class FilterState:
    t: float
    nav: NavState
    calib: Pose
    covariance: np.ndarray
    clones: List[Clone] = field(default_factory=list)
    landmarks: List[Landmark] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return NAV_DIM + CALIB_DIM + CLONE_DIM * len(self.clones) + LANDMARK_DIM * len(self.landmarks)

    def clone_offset(self, position: int) -> int:
        return NAV_DIM + CALIB_DIM + CLONE_DIM * position

    def clone_slice(self, clone_id: int) -> slice:
        start = self.clone_offset(self.clone_position(clone_id))
        return slice(start, start + CLONE_DIM)

    def clone_position(self, clone_id: int) -> int:
        for k, c in enumerate(self.clones):
            if c.id == clone_id:
                return k
        raise KeyError(clone_id)

    def clone_pose(self, clone_id: int) -> Pose:
        return self.clones[self.clone_position(clone_id)].pose

    @property
    def landmark_base(self) -> int:
        return self.clone_offset(len(self.clones))

    def landmark_slice(self, landmark_id: int) -> slice:
        for k, lm in enumerate(self.landmarks):
            if lm.id == landmark_id:
                start = self.landmark_base + LANDMARK_DIM * k
                return slice(start, start + LANDMARK_DIM)
        raise KeyError(landmark_id)

    def landmark_positions(self) -> Dict[int, np.ndarray]:
        return {lm.id: lm.position for lm in self.landmarks}

    def with_covariance(self, covariance: np.ndarray) -> "FilterState":
        return replace(self, covariance=covariance)

    def inject(self, delta: np.ndarray) -> "FilterState":
        """Apply an error-state correction to every nominal block."""
        clones = [
            Clone(c.id, c.t, c.pose.boxplus(delta[self.clone_offset(k):self.clone_offset(k) + CLONE_DIM]))
            for k, c in enumerate(self.clones)
        ]
        base = self.landmark_base
        landmarks = [
            Landmark(lm.id, lm.position + delta[base + LANDMARK_DIM * k:base + LANDMARK_DIM * (k + 1)])
            for k, lm in enumerate(self.landmarks)
        ]
        return replace(
            self,
            nav=self.nav.boxplus(delta[:NAV_DIM]),
            calib=self.calib.boxplus(delta[CALIB]),
            clones=clones,
            landmarks=landmarks,
        )


@dataclass
class ClassReport:
    measurement_class: MeasurementClass
    offered: int = 0
    accepted: int = 0
    rejected: int = 0
    residuals: List[float] = field(default_factory=list)
    innovation: List[float] = field(default_factory=list)
    chi2: List[float] = field(default_factory=list)
    skipped: str = ""


@dataclass
class UpdateReport:
    t: float
    classes: Dict[MeasurementClass, ClassReport] = field(default_factory=dict)

    def add(self, report: ClassReport) -> None:
        self.classes[report.measurement_class] = report

    def get(self, measurement_class: MeasurementClass) -> ClassReport:
        return self.classes.setdefault(measurement_class, ClassReport(measurement_class))
