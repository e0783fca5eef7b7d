"""On-manifold IMU preintegration between two radar-rate states.

The increments are accumulated with the same midpoint scheme the filter
uses for propagation, so a preintegrated segment and a propagated one agree
exactly for identical samples. Error ordering follows the navigation state:
[δp, δθ, δv, δb_a, δb_ω].
"""
import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.common.errors import EstimatorError
from src.common.models import ImuSample
from src.common.utils import GRAVITY, require_finite, symmetrize
from src.ekf.filter import transition
from src.geom.navstate import BA, BG, NAV_DIM, NavState, P, TH, V
from src.geom.transforms import Rotation, right_jacobian, right_jacobian_inv, skew, so3_exp, so3_log
from src.measurement.schemas import ProcessNoise

logger = logging.getLogger(__name__)

MOTION = slice(0, 9)
MIN_VARIANCE = 1e-12


class EmptySegmentError(EstimatorError):
    pass


@dataclass(frozen=True, eq=False)
class Preintegration:
    dt: float
    delta_p: np.ndarray
    delta_rot: np.ndarray     # ΔR as a matrix
    delta_v: np.ndarray
    bias_a: np.ndarray        # linearization biases
    bias_g: np.ndarray
    jacobian: np.ndarray      # (9, 6): d[Δp, Δθ, Δv]/d[b_a, b_ω]
    covariance: np.ndarray    # (15, 15) over the residual ordering

    def corrected(self, ba: np.ndarray, bg: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """First-order bias correction of (Δp, ΔR, Δv)."""
        db = np.concatenate([ba - self.bias_a, bg - self.bias_g])
        d = self.jacobian @ db
        return self.delta_p + d[P], self.delta_rot @ so3_exp(d[TH]), self.delta_v + d[V]

    def predict(self, nav: NavState) -> NavState:
        """State at the end of the segment starting from `nav`, biases held."""
        dp, drot, dv = self.corrected(nav.ba, nav.bg)
        rot = nav.R
        return NavState(
            p=nav.p + nav.v * self.dt + 0.5 * GRAVITY * self.dt**2 + rot @ dp,
            q=nav.q * Rotation.from_matrix(drot),
            v=nav.v + GRAVITY * self.dt + rot @ dv,
            ba=nav.ba,
            bg=nav.bg,
        )


def segment(samples: Sequence[ImuSample], t_start: float, t_end: float) -> List[Tuple[ImuSample, float]]:
    """(sample, dt) pairs covering [t_start, t_end]; each sample holds until the next one."""
    out = []
    for k, sample in enumerate(samples):
        t_next = samples[k + 1].t if k + 1 < len(samples) else t_end
        lo, hi = max(sample.t, t_start), min(t_next, t_end)
        if hi > lo:
            out.append((sample, hi - lo))
    return out


def preintegrate(
    samples: Sequence[ImuSample],
    t_start: float,
    t_end: float,
    ba: np.ndarray,
    bg: np.ndarray,
    noise: ProcessNoise,
) -> Preintegration:
    steps = segment(samples, t_start, t_end)
    if not steps:
        raise EmptySegmentError(f"no IMU samples cover [{t_start}, {t_end}]")

    rel = NavState(ba=ba, bg=bg)
    jac_total = np.eye(NAV_DIM)
    cov = np.zeros((9, 9))
    zero = np.zeros(3)
    for sample, dt in steps:
        require_finite("IMU sample", sample.accel, sample.gyro)
        rel, phi = transition(rel, sample, dt, gravity=zero)
        g_a, g_g = phi[MOTION, BA], phi[MOTION, BG]
        cov = phi[MOTION, MOTION] @ cov @ phi[MOTION, MOTION].T
        cov += (noise.accel_noise**2 / dt) * g_a @ g_a.T + (noise.gyro_noise**2 / dt) * g_g @ g_g.T
        jac_total = phi @ jac_total

    total = t_end - t_start
    full = np.zeros((NAV_DIM, NAV_DIM))
    full[MOTION, MOTION] = symmetrize(cov)
    full[BA, BA] = np.eye(3) * noise.accel_random_walk**2 * total
    full[BG, BG] = np.eye(3) * noise.gyro_random_walk**2 * total
    full += np.eye(NAV_DIM) * MIN_VARIANCE

    return Preintegration(
        dt=total,
        delta_p=rel.p,
        delta_rot=rel.R.copy(),
        delta_v=rel.v,
        bias_a=np.asarray(ba, dtype=float),
        bias_g=np.asarray(bg, dtype=float),
        jacobian=jac_total[MOTION, 9:15].copy(),
        covariance=full,
    )


def preintegration_residual(
    pim: Preintegration, xi: NavState, xj: NavState
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unwhitened residual [r_p, r_θ, r_v, r_ba, r_bω] and its Jacobians w.r.t. x_i and x_j."""
    dt = pim.dt
    r_i = xi.R
    db = np.concatenate([xi.ba - pim.bias_a, xi.bg - pim.bias_g])
    d = pim.jacobian @ db
    dp = pim.delta_p + d[P]
    dv = pim.delta_v + d[V]
    corr = so3_exp(d[TH])
    drot = pim.delta_rot @ corr

    u_p = xj.p - xi.p - xi.v * dt - 0.5 * GRAVITY * dt**2
    u_v = xj.v - xi.v - GRAVITY * dt
    err_rot = drot.T @ r_i.T @ xj.R
    r_th = so3_log(err_rot)
    jr_inv = right_jacobian_inv(r_th)

    residual = np.concatenate([
        r_i.T @ u_p - dp,
        r_th,
        r_i.T @ u_v - dv,
        xj.ba - xi.ba,
        xj.bg - xi.bg,
    ])

    j_a = pim.jacobian[:, 0:3]
    j_g = pim.jacobian[:, 3:6]
    ji = np.zeros((NAV_DIM, NAV_DIM))
    jj = np.zeros((NAV_DIM, NAV_DIM))

    ji[P, P] = -r_i.T
    ji[P, TH] = skew(r_i.T @ u_p)
    ji[P, V] = -r_i.T * dt
    ji[P, BA] = -j_a[P]
    ji[P, BG] = -j_g[P]
    jj[P, P] = r_i.T

    ji[TH, TH] = -jr_inv @ xj.R.T @ r_i
    ji[TH, BG] = -jr_inv @ err_rot.T @ right_jacobian(d[TH]) @ j_g[TH]
    jj[TH, TH] = jr_inv

    ji[V, TH] = skew(r_i.T @ u_v)
    ji[V, V] = -r_i.T
    ji[V, BA] = -j_a[V]
    ji[V, BG] = -j_g[V]
    jj[V, V] = r_i.T

    ji[BA, BA] = -np.eye(3)
    jj[BA, BA] = np.eye(3)
    ji[BG, BG] = -np.eye(3)
    jj[BG, BG] = np.eye(3)
    return residual, ji, jj
