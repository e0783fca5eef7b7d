import logging
from typing import Set, Tuple

import numpy as np
from scipy.signal import convolve2d

from src.common.enums import CfarGeometry
from src.common.errors import CfarWindowError
from .schemas import CfarConfig

logger = logging.getLogger(__name__)


def cfar_alpha(n_train: int, pfa: float) -> float:
    """Threshold scale α = N_r(P_fa^(-1/N_r) - 1) for exponential noise."""
    return n_train * (pfa ** (-1.0 / n_train) - 1.0)


def training_kernel(cfar: CfarConfig) -> np.ndarray:
    """Ones on training cells, zeros on guard cells and the cell under test.

    Axis 0 is range, axis 1 is Doppler.
    """
    arm = cfar.cells_per_arm
    reach = cfar.guard_cells + arm
    size = 2 * reach + 1
    if cfar.geometry == CfarGeometry.RANGE:
        kernel = np.zeros((size, 1))
        kernel[:arm, 0] = 1.0
        kernel[-arm:, 0] = 1.0
        return kernel

    kernel = np.zeros((size, size))
    kernel[:arm, reach] = 1.0
    kernel[-arm:, reach] = 1.0
    kernel[reach, :arm] = 1.0
    kernel[reach, -arm:] = 1.0
    return kernel


def ca_cfar_mask(power: np.ndarray, cfar: CfarConfig) -> np.ndarray:
    power = np.asarray(power, dtype=float)
    kernel = training_kernel(cfar)
    half_r, half_d = kernel.shape[0] // 2, kernel.shape[1] // 2
    if power.ndim != 2 or power.shape[0] < kernel.shape[0] or power.shape[1] < kernel.shape[1]:
        raise CfarWindowError(f"CFAR window {kernel.shape} does not fit map {power.shape}")

    noise = convolve2d(power, kernel, mode="same", boundary="fill") / cfar.train_cells
    mask = power > cfar_alpha(cfar.train_cells, cfar.pfa) * noise

    # training windows reaching past the map edge never declare a target
    interior = np.zeros_like(mask)
    interior[half_r:power.shape[0] - half_r, half_d:power.shape[1] - half_d] = True
    return mask & interior


def ca_cfar(power: np.ndarray, cfar: CfarConfig) -> Set[Tuple[int, int]]:
    """Cell-averaging CFAR on an antenna-averaged |·|² range-Doppler map."""
    rows, cols = np.nonzero(ca_cfar_mask(power, cfar))
    return {(int(r), int(c)) for r, c in zip(rows, cols)}
