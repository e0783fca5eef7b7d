"""Sliding-window factors.

Every factor exposes `keys` and `linearize(values)`, returning the whitened
residual rows and one whitened Jacobian block per key. Radar factors carry
one row per scalar measurement and are robustified row by row with dynamic
covariance scaling.
"""
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from src.common.enums import MeasurementClass
from src.geom.navstate import NAV_DIM, NavState, boxminus, boxminus_jacobian, tangent_dim
from src.geom.transforms import Pose, skew
from src.measurement.models import predict_distance, predict_doppler, predict_landmark
from .preintegration import Preintegration, preintegration_residual

Key = Tuple[str, int]
Linearization = Tuple[np.ndarray, Dict[Hashable, np.ndarray]]


def state_key(state_id: int) -> Key:
    return ("x", state_id)


def landmark_key(landmark_id: int) -> Key:
    return ("l", landmark_id)


def dcs_weight(residual_sq, phi: float):
    """Dynamic covariance scaling: s = min(1, 2Φ/(Φ + r²))."""
    if phi <= 0:
        raise ValueError("DCS kernel parameter must be positive")
    return np.minimum(1.0, 2.0 * phi / (phi + np.asarray(residual_sq, dtype=float)))


def dcs_cost(residual_sq, phi: float):
    """Per-row robust cost s²r² + Φ(1 − s)²; equals r² for inliers."""
    s = dcs_weight(residual_sq, phi)
    return s**2 * residual_sq + phi * (1.0 - s) ** 2


class Factor:
    keys: Tuple[Hashable, ...] = ()
    kernel: Optional[float] = None
    kind: str = "factor"

    def __len__(self) -> int:
        return 1

    def linearize(self, values: Mapping) -> Linearization:
        raise NotImplementedError

    def error(self, values: Mapping) -> np.ndarray:
        return self.linearize(values)[0]

    def cost(self, values: Mapping) -> float:
        r = self.error(values)
        if self.kernel is None:
            return 0.5 * float(r @ r)
        return 0.5 * float(np.sum(dcs_cost(r**2, self.kernel)))

    def weighted(self, values: Mapping) -> Linearization:
        """Residual and Jacobians with the robust row weights applied."""
        r, jac = self.linearize(values)
        if self.kernel is None:
            return r, jac
        s = dcs_weight(r**2, self.kernel)
        return s * r, {k: s[:, None] * j for k, j in jac.items()}


def _whitener(covariance: np.ndarray) -> np.ndarray:
    return cholesky(covariance, lower=True)


@dataclass(eq=False)
class PreintegrationFactor(Factor):
    key_i: Key
    key_j: Key
    pim: Preintegration
    kind: str = "preintegration"

    def __post_init__(self):
        self.keys = (self.key_i, self.key_j)
        self._chol = _whitener(self.pim.covariance)

    def __len__(self) -> int:
        return NAV_DIM

    def linearize(self, values: Mapping) -> Linearization:
        r, ji, jj = preintegration_residual(self.pim, values[self.key_i], values[self.key_j])
        w = lambda m: solve_triangular(self._chol, m, lower=True)  # noqa: E731
        return w(r), {self.key_i: w(ji), self.key_j: w(jj)}


@dataclass(eq=False)
class PriorFactor(Factor):
    """Quadratic prior ½δᵀHδ − bᵀδ on δ = x ⊟ x₀ for frozen values x₀."""

    keys: Tuple[Hashable, ...] = field()
    information: np.ndarray
    gradient: np.ndarray
    frozen: Dict[Hashable, object]
    kind: str = "prior"
    rank_tol: float = 1e-12

    def __post_init__(self):
        self.keys = tuple(self.keys)
        for value in self.frozen.values():
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
        eigval, eigvec = np.linalg.eigh(0.5 * (self.information + self.information.T))
        keep = eigval > self.rank_tol * max(1.0, eigval.max(initial=0.0))
        sqrt = np.sqrt(eigval[keep])
        self._sqrt_info = sqrt[:, None] * eigvec[:, keep].T
        self._offset = -(eigvec[:, keep].T @ self.gradient) / sqrt
        self._dims = [tangent_dim(self.frozen[k]) for k in self.keys]

    def __len__(self) -> int:
        return len(self._offset)

    @classmethod
    def from_covariance(cls, key: Hashable, value, covariance: np.ndarray) -> "PriorFactor":
        frozen = value.copy() if isinstance(value, np.ndarray) else value
        info = np.linalg.inv(covariance)
        return cls((key,), info, np.zeros(len(covariance)), {key: frozen})

    def linearize(self, values: Mapping) -> Linearization:
        deltas, jac, start = [], {}, 0
        for key, dim in zip(self.keys, self._dims):
            x, x0 = values[key], self.frozen[key]
            deltas.append(boxminus(x, x0))
            jac[key] = self._sqrt_info[:, start:start + dim] @ boxminus_jacobian(x, x0)
            start += dim
        r = self._offset + self._sqrt_info @ np.concatenate(deltas)
        return r, jac


@dataclass(eq=False)
class DopplerFactor(Factor):
    """Range rates of one scan's RANSAC inliers; `gyro` is the raw rate sample."""

    key: Key
    directions: np.ndarray
    measured: np.ndarray
    gyro: np.ndarray
    sigma: float
    extrinsics: Pose
    kernel: Optional[float] = 1.0
    kind: str = MeasurementClass.DOPPLER.value

    def __post_init__(self):
        self.keys = (self.key,)

    def __len__(self) -> int:
        return len(self.measured)

    def predict(self, values: Mapping) -> np.ndarray:
        nav: NavState = values[self.key]
        return predict_doppler(nav.R, nav.v, self.extrinsics, self.gyro - nav.bg, self.directions)[0]

    def linearize(self, values: Mapping) -> Linearization:
        nav: NavState = values[self.key]
        predicted, j = predict_doppler(nav.R, nav.v, self.extrinsics, self.gyro - nav.bg, self.directions)
        jac = np.zeros((len(predicted), NAV_DIM))
        jac[:, 3:6] = -j.attitude
        jac[:, 6:9] = -j.velocity
        jac[:, 12:15] = j.omega
        return (self.measured - predicted) / self.sigma, {self.key: jac / self.sigma}


@dataclass(eq=False)
class DistanceFactor(Factor):
    """Trail distances between one current state and one earlier state.

    `points` are the trail entries recorded in the earlier radar frame and
    `measured` the norms of their matched current points.
    """

    key_curr: Key
    key_prev: Key
    points: np.ndarray
    measured: np.ndarray
    sigmas: np.ndarray
    extrinsics: Pose
    kernel: Optional[float] = 1.0
    kind: str = MeasurementClass.DISTANCE.value

    def __post_init__(self):
        self.keys = (self.key_curr, self.key_prev)

    def __len__(self) -> int:
        return len(self.measured)

    def linearize(self, values: Mapping) -> Linearization:
        curr: NavState = values[self.key_curr]
        prev: NavState = values[self.key_prev]
        n = len(self.measured)
        d, j = predict_distance(
            curr.pose(), np.repeat(prev.R[None], n, axis=0), np.repeat(prev.p[None], n, axis=0),
            self.extrinsics, self.points,
        )
        jc = np.zeros((n, NAV_DIM))
        jp = np.zeros((n, NAV_DIM))
        jc[:, 0:6] = -j.curr
        jp[:, 0:6] = -j.prev
        inv = 1.0 / self.sigmas
        return (self.measured - d) * inv, {self.key_curr: jc * inv[:, None], self.key_prev: jp * inv[:, None]}


@dataclass(eq=False)
class LandmarkFactor(Factor):
    """Distances from one state to the landmarks matched in its scan."""

    key: Key
    landmark_keys: Sequence[Key]
    measured: np.ndarray
    sigma: float
    extrinsics: Pose
    kernel: Optional[float] = 1.0
    kind: str = MeasurementClass.LANDMARK.value

    def __post_init__(self):
        self.landmark_keys = list(self.landmark_keys)
        self.keys = (self.key, *self.landmark_keys)

    def __len__(self) -> int:
        return len(self.measured)

    def linearize(self, values: Mapping) -> Linearization:
        nav: NavState = values[self.key]
        landmarks = np.array([values[k] for k in self.landmark_keys]).reshape(-1, 3)
        d, j = predict_landmark(nav.pose(), self.extrinsics, landmarks)
        n = len(d)
        jx = np.zeros((n, NAV_DIM))
        jx[:, 0:6] = -j.curr
        jac: Dict[Hashable, np.ndarray] = {self.key: jx / self.sigma}
        for row, key in enumerate(self.landmark_keys):
            block = np.zeros((n, 3))
            block[row] = -j.landmark[row] / self.sigma
            jac[key] = block
        return (self.measured - d) / self.sigma, jac


@dataclass(eq=False)
class PointObservationFactor(Factor):
    """Full radar-frame position `point` of a landmark seen from one state.

    Introduces a freshly promoted landmark relative to the pose that saw it,
    whitened by the point's own spherical noise.
    """

    key: Key
    landmark: Key
    point: np.ndarray
    covariance: np.ndarray
    extrinsics: Pose
    kind: str = "landmark_init"

    def __post_init__(self):
        self.keys = (self.key, self.landmark)
        self._chol = _whitener(self.covariance)

    def __len__(self) -> int:
        return 3

    def linearize(self, values: Mapping) -> Linearization:
        nav: NavState = values[self.key]
        r_c, p_c = nav.R, nav.p
        r_ir, p_ir = self.extrinsics.R, self.extrinsics.p
        g = r_c.T @ (values[self.landmark] - p_c)
        predicted = r_ir.T @ (g - p_ir)
        jx = np.zeros((3, NAV_DIM))
        jx[:, 0:3] = r_ir.T @ r_c.T
        jx[:, 3:6] = -r_ir.T @ skew(g)
        w = lambda m: solve_triangular(self._chol, m, lower=True)  # noqa: E731
        return w(self.point - predicted), {self.key: w(jx), self.landmark: w(-r_ir.T @ r_c.T)}


@dataclass(eq=False)
class LinearFactor(Factor):
    """r = (Σ_k A_k x_k − z) / σ over vector-valued variables."""

    keys: Tuple[Hashable, ...] = field()
    matrices: List[np.ndarray]
    target: np.ndarray
    sigma: float = 1.0
    kind: str = "linear"
    kernel: Optional[float] = None

    def __post_init__(self):
        self.keys = tuple(self.keys)
        self.matrices = [np.atleast_2d(np.asarray(a, dtype=float)) for a in self.matrices]
        self.target = np.atleast_1d(np.asarray(self.target, dtype=float))

    def __len__(self) -> int:
        return len(self.target)

    def linearize(self, values: Mapping) -> Linearization:
        r = sum(a @ values[k] for k, a in zip(self.keys, self.matrices)) - self.target
        return r / self.sigma, {k: a / self.sigma for k, a in zip(self.keys, self.matrices)}
