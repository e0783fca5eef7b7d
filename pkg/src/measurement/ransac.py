import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .schemas import RansacConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EgoVelocityFit:
    velocity: Optional[np.ndarray]  # radar-frame ego-velocity, None when skipped
    inliers: np.ndarray             # boolean mask over the input points
    skipped: str = ""

    @property
    def ok(self) -> bool:
        return self.velocity is not None


def _solve(directions: np.ndarray, doppler: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(-directions, doppler, rcond=None)[0]


def fit_ego_velocity(
    directions: np.ndarray,
    doppler: np.ndarray,
    cfg: RansacConfig,
    rng: np.random.Generator,
) -> EgoVelocityFit:
    """3-point RANSAC on doppler = −r̂ᵀ v_R, refined by least squares on the consensus set."""
    directions = np.asarray(directions, dtype=float).reshape(-1, 3)
    doppler = np.asarray(doppler, dtype=float).reshape(-1)
    n = len(doppler)
    if n < 3:
        logger.warning("RANSAC skipped: %d points, need 3", n)
        return EgoVelocityFit(None, np.zeros(n, dtype=bool), skipped=f"{n} points")

    best = np.zeros(n, dtype=bool)
    for _ in range(cfg.iterations):
        sample = rng.choice(n, size=3, replace=False)
        a = -directions[sample]
        if abs(np.linalg.det(a)) < 1e-6:
            continue
        v = np.linalg.solve(a, doppler[sample])
        inliers = np.abs(doppler + directions @ v) < cfg.threshold
        if inliers.sum() > best.sum():
            best = inliers

    if best.sum() < cfg.min_inliers:
        logger.warning("RANSAC skipped: best consensus %d below %d", best.sum(), cfg.min_inliers)
        return EgoVelocityFit(None, np.zeros(n, dtype=bool), skipped="no consensus")

    v = _solve(directions[best], doppler[best])
    inliers = np.abs(doppler + directions @ v) < cfg.threshold
    if inliers.sum() >= cfg.min_inliers:
        v = _solve(directions[inliers], doppler[inliers])
    else:
        inliers = best
    return EgoVelocityFit(v, inliers)
