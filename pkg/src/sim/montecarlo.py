import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.common.config import SimConfig
from src.common.models import ImuSample, RadarScan, TruthState
from src.common.utils import substreams
from src.geom.navstate import NavState
from .sensors import WorldMap, gen_world, sample_imu, sample_radar
from .trajectory import gen_trajectory

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SimulatedRun:
    config: SimConfig
    run_index: int
    truth: List[TruthState]
    imu: List[ImuSample]
    radar: List[RadarScan]
    world: WorldMap
    initial_state: NavState


def perturb_initial_state(truth: TruthState, cfg: SimConfig, rng: np.random.Generator) -> NavState:
    """Initial estimate: truth (with the true initial biases) plus a draw from the initial σ's."""
    nav = NavState(
        p=truth.nav.p,
        q=truth.nav.q,
        v=truth.nav.v,
        ba=np.asarray(cfg.noise.accel_bias, dtype=float),
        bg=np.asarray(cfg.noise.gyro_bias, dtype=float),
    )
    if not cfg.noise.perturb_initial_state:
        return nav
    return nav.boxplus(cfg.init.nav_sigmas() * rng.standard_normal(15))


def simulate(cfg: SimConfig, run_index: int = 0, truth: Optional[List[TruthState]] = None,
             world: Optional[WorldMap] = None) -> SimulatedRun:
    """One noise realization; truth and world depend only on the master seed."""
    if truth is None:
        truth = gen_trajectory(cfg.trajectory, cfg.imu_rate)
    if world is None:
        world = gen_world(truth, cfg.world, substreams(cfg.seed, 0)[0])
    imu_rng, radar_rng, init_rng = substreams(cfg.seed, run_index + 1, 3)

    imu = sample_imu(truth, cfg.noise, imu_rng)
    extrinsics = cfg.extrinsics.pose()
    radar = [
        sample_radar(truth[k], world, cfg.noise, cfg.radar, extrinsics, radar_rng, gyro=imu[k].gyro)
        for k in range(cfg.radar_period, len(imu), cfg.radar_period)
    ]
    logger.info("run %d: %d IMU samples, %d radar scans", run_index, len(imu), len(radar))
    return SimulatedRun(
        config=cfg,
        run_index=run_index,
        truth=truth,
        imu=imu,
        radar=radar,
        world=world,
        initial_state=perturb_initial_state(truth[0], cfg, init_rng),
    )


def _simulate_index(args) -> SimulatedRun:
    cfg, run_index = args
    return simulate(cfg, run_index)


def run_montecarlo(cfg: SimConfig, n_runs: Optional[int] = None, seed: Optional[int] = None,
                   jobs: int = 1) -> List[SimulatedRun]:
    """Runs sharing truth and world, each with its own RNG substreams."""
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    n_runs = cfg.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_simulate_index, [(cfg, i) for i in range(n_runs)]))

    truth = gen_trajectory(cfg.trajectory, cfg.imu_rate)
    world = gen_world(truth, cfg.world, substreams(cfg.seed, 0)[0])
    return [simulate(cfg, i, truth, world) for i in range(n_runs)]
