"""Navigation state and the error-state conventions shared by both backends.

Error vector ordering is [δp, δθ, δv, δb_a, δb_ω] (15). The true state is
the estimate with the error injected: translations add, rotations are
right-multiplied, q = q̂ ⊗ [1; δθ/2].
"""
from dataclasses import dataclass, field, replace

import numpy as np

from src.common.enums import Frame
from .transforms import Pose, Rotation
from .transforms import boxminus_jacobian as rotation_chart_jacobian

NAV_DIM = 15
P, TH, V, BA, BG = slice(0, 3), slice(3, 6), slice(6, 9), slice(9, 12), slice(12, 15)


def _vec3(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).reshape(3).copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class NavState:
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    q: Rotation = field(default_factory=Rotation.identity)
    v: np.ndarray = field(default_factory=lambda: np.zeros(3))
    ba: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bg: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("p", "v", "ba", "bg"):
            object.__setattr__(self, name, _vec3(getattr(self, name)))

    @property
    def R(self) -> np.ndarray:
        return self.q.matrix

    def pose(self) -> Pose:
        return Pose(self.q, self.p, Frame.WORLD, Frame.IMU)

    def boxplus(self, delta: np.ndarray) -> "NavState":
        return NavState(
            p=self.p + delta[P],
            q=self.q.boxplus(delta[TH]),
            v=self.v + delta[V],
            ba=self.ba + delta[BA],
            bg=self.bg + delta[BG],
        )

    def boxminus(self, other: "NavState") -> np.ndarray:
        return np.concatenate([
            self.p - other.p,
            self.q.boxminus(other.q),
            self.v - other.v,
            self.ba - other.ba,
            self.bg - other.bg,
        ])

    def with_velocity(self, v: np.ndarray) -> "NavState":
        return replace(self, v=v)


def boxplus(x, delta: np.ndarray):
    """Inject an error vector into any manifold value used by the estimators."""
    if isinstance(x, np.ndarray):
        return x + delta
    return x.boxplus(delta)


def boxminus(a, b) -> np.ndarray:
    if isinstance(a, np.ndarray):
        return a - b
    return a.boxminus(b)


def tangent_dim(x) -> int:
    if isinstance(x, np.ndarray):
        return x.size
    if isinstance(x, Rotation):
        return 3
    if isinstance(x, Pose):
        return 6
    return NAV_DIM


def boxminus_jacobian(x, x0) -> np.ndarray:
    """d((x ⊞ δ) ⊟ x0)/dδ at δ = 0."""
    if isinstance(x, np.ndarray):
        return np.eye(x.size)
    if isinstance(x, Pose):
        jac = np.eye(6)
        jac[3:6, 3:6] = rotation_chart_jacobian(x.rotation.boxminus(x0.rotation))
        return jac
    jac = np.eye(NAV_DIM)
    jac[TH, TH] = rotation_chart_jacobian(x.q.boxminus(x0.q))
    return jac
