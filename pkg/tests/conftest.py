import os
import sys

import numpy as np
import pytest

# Ensure project root is on sys.path so 'src' package can be imported
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
if project_root not in sys.path:
    sys.path.insert(0, project_root)

from src.geom.navstate import NavState, boxplus, tangent_dim  # noqa: E402
from src.geom.transforms import Rotation  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_nav(rng: np.random.Generator, scale: float = 1.0) -> NavState:
    return NavState(
        p=scale * rng.normal(size=3),
        q=Rotation.from_rotvec(0.5 * rng.normal(size=3)),
        v=scale * rng.normal(size=3),
        ba=0.05 * rng.normal(size=3),
        bg=0.01 * rng.normal(size=3),
    )


def numeric_jacobian(fn, x, eps: float = 1e-6) -> np.ndarray:
    """Central differences of fn(x ⊞ δ) with respect to δ; fn returns an ndarray."""
    n = tangent_dim(x)
    f0 = np.asarray(fn(x), dtype=float)
    jac = np.zeros((f0.size, n))
    for k in range(n):
        d = np.zeros(n)
        d[k] = eps
        jac[:, k] = (np.asarray(fn(boxplus(x, d))) - np.asarray(fn(boxplus(x, -d)))).reshape(-1) / (2 * eps)
    return jac


@pytest.fixture(scope="session")
def noiseless_sim():
    """Four seconds on a small circle with perfect sensors."""
    from src.common.config import SimConfig
    from src.common.enums import TrajectoryFamily
    from src.sim.montecarlo import simulate
    from src.sim.schemas import NoiseConfig, TrajectorySpec, WorldConfig

    cfg = SimConfig(
        seed=5,
        trajectory=TrajectorySpec(family=TrajectoryFamily.CIRCLE, amplitude=(3.0, 3.0, 0.0), period=20.0,
                                  duration=4.0),
        noise=NoiseConfig.zero(),
        world=WorldConfig(n_scatterers=1500, margin=4.0),
    )
    return simulate(cfg, 0)


@pytest.fixture(scope="session")
def turning_sim():
    """Two noiseless seconds on a circle while yawing at 0.5 rad/s."""
    from src.common.config import SimConfig
    from src.common.enums import TrajectoryFamily, YawProfile
    from src.sim.montecarlo import simulate
    from src.sim.schemas import NoiseConfig, TrajectorySpec, WorldConfig

    cfg = SimConfig(
        seed=7,
        trajectory=TrajectorySpec(family=TrajectoryFamily.CIRCLE, amplitude=(3.0, 3.0, 0.0), period=20.0,
                                  duration=2.0, yaw=YawProfile.RATE, yaw_rate=0.5),
        noise=NoiseConfig.zero(),
        world=WorldConfig(n_scatterers=1500, margin=4.0),
    )
    return simulate(cfg, 0)


def without_scan_gyro(sim):
    """The same run with the gyro reading stripped from every radar scan."""
    from dataclasses import replace

    return replace(sim, radar=[replace(scan, gyro=None) for scan in sim.radar])


@pytest.fixture
def run_config():
    from src.common.config import RunConfig

    return RunConfig()


def run_backend_on(backend, sim):
    """Feed a simulated run through a backend; returns the per-scan outcomes."""
    from src.common.enums import EventKind
    from src.harness.dataset import events

    outcomes = []
    for kind, item in events(sim.imu, sim.radar):
        if kind == EventKind.IMU:
            backend.on_imu(item)
        else:
            outcomes.append(backend.on_radar(item))
    return outcomes


def truth_at(sim, t: float):
    return min(sim.truth, key=lambda s: abs(s.t - t))
