"""SO(3)/SE(3) value types.

Quaternions are Hamilton, stored scalar first as (w, x, y, z). A `Rotation`
built from q maps vectors from its source frame into its target frame, so
`R_GI` rotates IMU-frame vectors into the world frame.
"""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.spatial.transform import Rotation as SciRotation

from src.common.enums import Frame
from src.common.errors import FrameMismatchError

_NORM_TOL = 4.0 * np.finfo(float).eps


def skew(v: np.ndarray) -> np.ndarray:
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def _normalized(q: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(q)
    if abs(n - 1.0) > _NORM_TOL:
        q = q / n
    if q[0] < 0.0:
        q = -q
    return q


@dataclass(frozen=True, eq=False)
class Rotation:
    q: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))

    def __post_init__(self):
        q = _normalized(np.asarray(self.q, dtype=float).reshape(4).copy())
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @classmethod
    def identity(cls) -> "Rotation":
        return cls()

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "Rotation":
        x, y, z, w = SciRotation.from_matrix(mat).as_quat()
        return cls(np.array([w, x, y, z]))

    @classmethod
    def from_rotvec(cls, rotvec: np.ndarray) -> "Rotation":
        x, y, z, w = SciRotation.from_rotvec(rotvec).as_quat()
        return cls(np.array([w, x, y, z]))

    @classmethod
    def from_euler(cls, seq: str, angles, degrees: bool = False) -> "Rotation":
        x, y, z, w = SciRotation.from_euler(seq, angles, degrees=degrees).as_quat()
        return cls(np.array([w, x, y, z]))

    @cached_property
    def matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        mat = SciRotation.from_quat([x, y, z, w]).as_matrix()
        mat.setflags(write=False)
        return mat

    def as_matrix(self) -> np.ndarray:
        return self.matrix.copy()

    def as_euler(self, seq: str = "xyz", degrees: bool = False) -> np.ndarray:
        w, x, y, z = self.q
        return SciRotation.from_quat([x, y, z, w]).as_euler(seq, degrees=degrees)

    def log(self) -> np.ndarray:
        w, x, y, z = self.q
        return SciRotation.from_quat([x, y, z, w]).as_rotvec()

    def inverse(self) -> "Rotation":
        w, x, y, z = self.q
        return Rotation(np.array([w, -x, -y, -z]))

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(quat_multiply(self.q, other.q))

    def rotate(self, v: np.ndarray) -> np.ndarray:
        return self.matrix @ v

    def boxplus(self, theta: np.ndarray) -> "Rotation":
        """Right-multiplicative update q ⊗ [1; θ/2]."""
        dq = np.array([1.0, 0.5 * theta[0], 0.5 * theta[1], 0.5 * theta[2]])
        return Rotation(quat_multiply(self.q, dq))

    def boxminus(self, other: "Rotation") -> np.ndarray:
        """θ such that other.boxplus(θ) == self."""
        dq = quat_multiply(other.inverse().q, self.q)
        if dq[0] < 0.0:
            dq = -dq
        return 2.0 * dq[1:] / dq[0]

    def is_close(self, other: "Rotation", atol: float = 1e-10) -> bool:
        return bool(np.linalg.norm(self.boxminus(other)) <= atol)


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform mapping points from `source` coordinates into `target`."""

    rotation: Rotation = field(default_factory=Rotation.identity)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    target: Optional[Frame] = None
    source: Optional[Frame] = None

    def __post_init__(self):
        t = np.asarray(self.translation, dtype=float).reshape(3).copy()
        t.setflags(write=False)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls, target: Optional[Frame] = None, source: Optional[Frame] = None) -> "Pose":
        return cls(Rotation.identity(), np.zeros(3), target, source)

    @property
    def R(self) -> np.ndarray:
        return self.rotation.matrix

    @property
    def p(self) -> np.ndarray:
        return self.translation

    def inverse(self) -> "Pose":
        rt = self.rotation.inverse()
        return Pose(rt, -(rt.matrix @ self.translation), self.source, self.target)

    def transform_point(self, point: np.ndarray) -> np.ndarray:
        return self.R @ point + self.translation

    def boxplus(self, delta: np.ndarray) -> "Pose":
        """[δp; δθ] with the same conventions as the navigation error state."""
        return Pose(self.rotation.boxplus(delta[3:6]), self.translation + delta[0:3], self.target, self.source)

    def boxminus(self, other: "Pose") -> np.ndarray:
        return np.concatenate([self.translation - other.translation, self.rotation.boxminus(other.rotation)])

    def is_close(self, other: "Pose", atol: float = 1e-10) -> bool:
        return self.rotation.is_close(other.rotation, atol) and bool(
            np.allclose(self.translation, other.translation, atol=atol)
        )


def compose(a: Pose, b: Pose) -> Pose:
    if a.source is not None and b.target is not None and a.source != b.target:
        raise FrameMismatchError(
            f"Cannot compose {a.target}<-{a.source} with {b.target}<-{b.source}"
        )
    return Pose(a.rotation * b.rotation, a.R @ b.translation + a.translation, a.target, b.source)


def right_jacobian(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    k = skew(phi)
    if angle < 1e-8:
        return np.eye(3) - 0.5 * k
    return (
        np.eye(3)
        - (1.0 - np.cos(angle)) / angle**2 * k
        + (angle - np.sin(angle)) / angle**3 * (k @ k)
    )


def right_jacobian_inv(phi: np.ndarray) -> np.ndarray:
    angle = np.linalg.norm(phi)
    k = skew(phi)
    if angle < 1e-8:
        return np.eye(3) + 0.5 * k
    return (
        np.eye(3)
        + 0.5 * k
        + (1.0 / angle**2 - (1.0 + np.cos(angle)) / (2.0 * angle * np.sin(angle))) * (k @ k)
    )


def so3_exp(phi: np.ndarray) -> np.ndarray:
    return SciRotation.from_rotvec(phi).as_matrix()


def so3_log(mat: np.ndarray) -> np.ndarray:
    return SciRotation.from_matrix(mat).as_rotvec()


def boxminus_jacobian(theta: np.ndarray) -> np.ndarray:
    """d(R.boxplus(δ) ⊟ R0)/dδ at δ = 0, where θ = R ⊟ R0."""
    half = 0.5 * np.asarray(theta, dtype=float)
    return np.eye(3) + skew(half) + np.outer(half, half)
