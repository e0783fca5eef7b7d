"""Radar cube to sparse 4D point cloud: range FFT, Doppler FFT, CA-CFAR, angle FFT."""
import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.ndimage import maximum_filter
from scipy.signal import get_window

from src.common.enums import WindowKind
from src.common.errors import NoSolutionError
from src.common.models import RadarScan
from .cfar import ca_cfar_mask
from .schemas import CfarConfig, ChirpConfig
from .signal import RadarCube, angle_from_phase, dechirp, doppler_velocity, range_bin_spacing

logger = logging.getLogger(__name__)

_SCIPY_WINDOWS = {
    WindowKind.RECTANGULAR: "boxcar",
    WindowKind.HAMMING: "hamming",
    WindowKind.HANN: "hann",
}


@dataclass(frozen=True)
class Detection:
    range_bin: int
    doppler_bin: int  # signed, 0 is zero velocity
    azimuth: float
    elevation: float
    range: float
    radial_velocity: float
    power: float

    def position(self) -> np.ndarray:
        ce = np.cos(self.elevation)
        return self.range * np.array([
            ce * np.cos(self.azimuth),
            ce * np.sin(self.azimuth),
            np.sin(self.elevation),
        ])


def _window(kind: WindowKind, n: int) -> np.ndarray:
    return get_window(_SCIPY_WINDOWS[kind], n, fftbins=False)


def range_doppler_spectrum(cube: RadarCube) -> np.ndarray:
    """Complex spectrum indexed [range bin][Doppler bin (shifted)][antenna]."""
    cfg = cube.config
    x = dechirp(cube.samples)
    x = x * _window(cfg.window, cfg.n_samples)[:, None, None]
    x = x * _window(cfg.window, cfg.n_chirps)[None, :, None]

    spectrum = np.fft.fft(x, axis=0)[: cfg.n_samples // 2]
    return np.fft.fftshift(np.fft.fft(spectrum, axis=1), axes=1)


def power_map(spectrum: np.ndarray) -> np.ndarray:
    return np.mean(np.abs(spectrum) ** 2, axis=2)


def _antenna_grid(cfg: ChirpConfig) -> Tuple[np.ndarray, np.ndarray, Tuple[int, int]]:
    offsets = np.rint(np.asarray(cfg.antennas, dtype=float)).astype(int)
    offsets -= offsets.min(axis=0)
    shape = tuple(int(n) for n in offsets.max(axis=0) + 1)
    return offsets[:, 0], offsets[:, 1], shape


def _wrapped_phase(k: int, n: int) -> float:
    return float(np.angle(np.exp(2j * np.pi * k / n)))


def estimate_angles(snapshot: np.ndarray, cfg: ChirpConfig) -> Tuple[float, float]:
    """(azimuth, elevation) from the zero-padded 2D FFT peak over the virtual array."""
    h_idx, v_idx, (n_h, n_v) = _antenna_grid(cfg)
    grid = np.zeros((n_h, n_v), dtype=complex)
    grid[h_idx, v_idx] = snapshot

    pad_h = n_h * cfg.angle_pad if n_h > 1 else 1
    pad_v = n_v * cfg.angle_pad if n_v > 1 else 1
    spectrum = np.abs(np.fft.fft2(grid, s=(pad_h, pad_v)))
    k_h, k_v = np.unravel_index(int(np.argmax(spectrum)), spectrum.shape)

    elevation = angle_from_phase(_wrapped_phase(k_v, pad_v), cfg) if n_v > 1 else 0.0
    azimuth = angle_from_phase(_wrapped_phase(k_h, pad_h) / np.cos(elevation), cfg) if n_h > 1 else 0.0
    return azimuth, elevation


def detect(cube: RadarCube, cfar: CfarConfig) -> List[Detection]:
    cfg = cube.config
    spectrum = range_doppler_spectrum(cube)
    power = power_map(spectrum)

    peaks = power == maximum_filter(power, size=3, mode="constant", cval=0.0)
    mask = ca_cfar_mask(power, cfar) & peaks

    spacing = range_bin_spacing(cfg)
    half = cfg.n_chirps // 2
    detections = []
    for r, d in zip(*np.nonzero(mask)):
        # conj turns the antenna progression back to the physical sign
        try:
            azimuth, elevation = estimate_angles(np.conj(spectrum[r, d, :]), cfg)
        except NoSolutionError:
            logger.debug("dropping detection at bins (%d, %d): no physical angle", r, d)
            continue
        doppler_bin = int(d) - half
        detections.append(
            Detection(
                range_bin=int(r),
                doppler_bin=doppler_bin,
                azimuth=azimuth,
                elevation=elevation,
                range=float(r) * spacing,
                radial_velocity=doppler_velocity(2.0 * np.pi * doppler_bin / cfg.n_chirps, cfg),
                power=float(power[r, d]),
            )
        )
    logger.debug("%d detections at t=%.6f", len(detections), cube.timestamp)
    return detections


def cube_to_pointcloud(cube: RadarCube, cfar: CfarConfig) -> RadarScan:
    detections = detect(cube, cfar)
    return RadarScan(
        t=cube.timestamp,
        positions=np.array([d.position() for d in detections]).reshape(-1, 3),
        doppler=np.array([d.radial_velocity for d in detections]),
        intensity=np.array([d.power for d in detections]),
    )
