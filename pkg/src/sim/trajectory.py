"""Analytic ground-truth trajectories.

Every family is a path f(θ) with closed-form derivatives, traversed with a
time law θ(t). Position, velocity and acceleration therefore follow exactly:
v = f'(θ)θ̇, a = f''(θ)θ̇² + f'(θ)θ̈.
"""
import logging
from typing import List, Tuple

import numpy as np

from src.common.enums import TrajectoryFamily, YawProfile
from src.common.errors import ConfigError
from src.common.models import TruthState
from src.geom.navstate import NavState
from src.geom.transforms import Rotation
from .schemas import TrajectorySpec

logger = logging.getLogger(__name__)

Triple = Tuple[np.ndarray, np.ndarray, np.ndarray]


def _path(spec: TrajectorySpec, th: np.ndarray) -> Triple:
    """f, df/dθ and d²f/dθ² of the family, each (n, 3)."""
    ax, ay, az = spec.amplitude
    zeros = np.zeros_like(th)
    s, c = np.sin(th), np.cos(th)

    if spec.family == TrajectoryFamily.HOVER:
        f = np.stack([zeros, zeros, zeros], axis=1)
        return f, f.copy(), f.copy()

    if spec.family in (TrajectoryFamily.CIRCLE, TrajectoryFamily.HOVER_THEN_LOOP):
        f = np.stack([ax * c, ay * s, zeros], axis=1)
        df = np.stack([-ax * s, ay * c, zeros], axis=1)
        ddf = np.stack([-ax * c, -ay * s, zeros], axis=1)
        return f, df, ddf

    if spec.family == TrajectoryFamily.LISSAJOUS:
        s2, c2, s3, c3 = np.sin(2 * th), np.cos(2 * th), np.sin(3 * th), np.cos(3 * th)
        f = np.stack([ax * s, ay * s2, az * s3], axis=1)
        df = np.stack([ax * c, 2 * ay * c2, 3 * az * c3], axis=1)
        ddf = np.stack([-ax * s, -4 * ay * s2, -9 * az * s3], axis=1)
        return f, df, ddf

    # rounded rectangle: a squircle-like loop with a vertical wave
    s2, c2, s3, c3 = np.sin(2 * th), np.cos(2 * th), np.sin(3 * th), np.cos(3 * th)
    f = np.stack([ax * (c - c3 / 6.0), ay * (s + s3 / 6.0), az * s2], axis=1)
    df = np.stack([ax * (-s + 0.5 * s3), ay * (c + 0.5 * c3), 2 * az * c2], axis=1)
    ddf = np.stack([ax * (-c + 1.5 * c3), ay * (-s - 1.5 * s3), -4 * az * s2], axis=1)
    return f, df, ddf


def _smoothstep(tau: np.ndarray) -> Triple:
    """Quintic ramp s(τ), its integral and its derivative on [0, 1]."""
    tau = np.clip(tau, 0.0, 1.0)
    s = 10 * tau**3 - 15 * tau**4 + 6 * tau**5
    integral = 2.5 * tau**4 - 3 * tau**5 + tau**6
    ds = 30 * tau**2 - 60 * tau**3 + 30 * tau**4
    return s, integral, ds


def _time_law(spec: TrajectorySpec, t: np.ndarray) -> Triple:
    rate = 2.0 * np.pi / spec.period
    if spec.family == TrajectoryFamily.HOVER:
        zeros = np.zeros_like(t)
        return zeros, zeros.copy(), zeros.copy()
    if spec.family != TrajectoryFamily.HOVER_THEN_LOOP and spec.hover_time == 0.0:
        return rate * t, np.full_like(t, rate), np.zeros_like(t)

    moving = np.maximum(t - spec.hover_time, 0.0)
    tau = moving / spec.ramp_time
    s, integral, ds = _smoothstep(tau)
    ramping = tau < 1.0
    th = np.where(ramping, rate * spec.ramp_time * integral, rate * (0.5 * spec.ramp_time + moving - spec.ramp_time))
    th_dot = rate * s
    th_ddot = np.where(ramping & (moving > 0.0), rate * ds / spec.ramp_time, 0.0)
    return th, th_dot, th_ddot


def _attitude(spec: TrajectorySpec, t: np.ndarray) -> Tuple[Triple, Triple]:
    """(yaw, pitch, roll) angles and their rates."""
    w_e = 2.0 * np.pi / spec.excitation_period
    roll = spec.roll_amplitude * np.sin(w_e * t)
    roll_dot = spec.roll_amplitude * w_e * np.cos(w_e * t)
    pitch = spec.pitch_amplitude * np.sin(w_e * t + 0.5 * np.pi)
    pitch_dot = spec.pitch_amplitude * w_e * np.cos(w_e * t + 0.5 * np.pi)

    if spec.yaw == YawProfile.RATE:
        yaw = spec.yaw_initial + spec.yaw_rate * t
        yaw_dot = np.full_like(t, spec.yaw_rate)
    elif spec.yaw == YawProfile.SINUSOID:
        w_y = 2.0 * np.pi / spec.yaw_period
        yaw = spec.yaw_initial + spec.yaw_amplitude * np.sin(w_y * t)
        yaw_dot = spec.yaw_amplitude * w_y * np.cos(w_y * t)
    else:
        yaw = np.full_like(t, spec.yaw_initial)
        yaw_dot = np.zeros_like(t)
    return (yaw, pitch, roll), (yaw_dot, pitch_dot, roll_dot)


def body_rates(angles: Triple, rates: Triple) -> np.ndarray:
    """Body angular velocity from intrinsic ZYX Euler angles and their rates."""
    _, pitch, roll = angles
    yaw_dot, pitch_dot, roll_dot = rates
    sr, cr = np.sin(roll), np.cos(roll)
    sp, cp = np.sin(pitch), np.cos(pitch)
    return np.stack([
        roll_dot - yaw_dot * sp,
        pitch_dot * cr + yaw_dot * cp * sr,
        -pitch_dot * sr + yaw_dot * cp * cr,
    ], axis=1)


def gen_trajectory(spec: TrajectorySpec, rate: float = 200.0) -> List[TruthState]:
    """Dense ground truth sampled at `rate` over [0, duration]."""
    n = int(round(spec.duration * rate)) + 1
    t = np.arange(n) / rate

    th, th_dot, th_ddot = _time_law(spec, t)
    f, df, ddf = _path(spec, th)
    p = np.asarray(spec.center) + f
    v = df * th_dot[:, None]
    a = ddf * (th_dot**2)[:, None] + df * th_ddot[:, None]

    speed = np.linalg.norm(v, axis=1).max(initial=0.0)
    if speed > spec.max_speed:
        raise ConfigError(f"trajectory peaks at {speed:.2f} m/s, above max_speed={spec.max_speed}")

    angles, rates = _attitude(spec, t)
    omega = body_rates(angles, rates)
    euler = np.stack(angles, axis=1)

    logger.info("generated %s trajectory: %d samples, %.1f m", spec.family.value, n, path_length(p))
    return [
        TruthState(
            t=float(t[k]),
            nav=NavState(p=p[k], q=Rotation.from_euler("ZYX", euler[k]), v=v[k]),
            omega=omega[k],
            accel=a[k],
        )
        for k in range(n)
    ]


def path_length(positions: np.ndarray) -> float:
    return float(np.sum(np.linalg.norm(np.diff(positions, axis=0), axis=1)))
