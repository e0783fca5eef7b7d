"""FMCW sensing relations: chirp synthesis, mixing and the range/Doppler/angle maps."""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.common.errors import LengthMismatchError, NoSolutionError
from src.common.utils import SPEED_OF_LIGHT
from .schemas import ChirpConfig


def gen_chirp(cfg: ChirpConfig, t: np.ndarray, theta: float = 0.0) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return np.exp(1j * (np.pi * cfg.slope * t**2 + 2.0 * np.pi * cfg.start_frequency * t + theta))


def mix(tx: np.ndarray, rx: np.ndarray) -> np.ndarray:
    if np.shape(tx) != np.shape(rx):
        raise LengthMismatchError(f"tx shape {np.shape(tx)} != rx shape {np.shape(rx)}")
    return rx * np.conj(tx)


def dechirp(beat: np.ndarray) -> np.ndarray:
    """Conjugate of the mixer output.

    rx·conj(tx) rotates backwards in fast time and in slow time; after one
    conjugation both progressions are positive so forward FFT bins map
    directly onto range and Doppler. The antenna progression flips the other
    way and is conjugated back before angle estimation.
    """
    return np.conj(beat)


def beat_frequency(beat: np.ndarray, sample_rate: float) -> float:
    """Frequency [Hz] of the dominant tone of a beat signal."""
    spectrum = np.abs(np.fft.fft(dechirp(beat)))
    freqs = np.fft.fftfreq(len(beat), d=1.0 / sample_rate)
    return float(abs(freqs[int(np.argmax(spectrum))]))


def range_from_beat(f_r: float, cfg: ChirpConfig) -> float:
    return f_r * SPEED_OF_LIGHT / (2.0 * cfg.slope)


def range_bin_spacing(cfg: ChirpConfig) -> float:
    return range_from_beat(cfg.sample_rate / cfg.n_samples, cfg)


@dataclass(frozen=True)
class Resolutions:
    range_resolution: float
    velocity_resolution: float
    max_range: float
    max_velocity: float
    wavelength: float
    spacing: float
    n_antennas: int

    def angle_resolution(self, theta: float = 0.0) -> float:
        return self.wavelength / (self.n_antennas * self.spacing * np.cos(theta))


def resolutions(cfg: ChirpConfig) -> Resolutions:
    lam = cfg.wavelength
    return Resolutions(
        range_resolution=SPEED_OF_LIGHT / (2.0 * cfg.bandwidth),
        velocity_resolution=lam / (2.0 * cfg.n_chirps * cfg.chirp_duration),
        max_range=cfg.n_samples * SPEED_OF_LIGHT / (4.0 * cfg.bandwidth),
        max_velocity=lam / (4.0 * cfg.chirp_duration),
        wavelength=lam,
        spacing=cfg.spacing,
        n_antennas=cfg.n_antennas,
    )


def doppler_velocity(dphi: float, cfg: ChirpConfig) -> float:
    return cfg.wavelength * dphi / (4.0 * np.pi * cfg.chirp_duration)


def angle_from_phase(dphi: float, cfg: ChirpConfig) -> float:
    s = dphi * cfg.wavelength / (2.0 * np.pi * cfg.spacing)
    if abs(s) > 1.0 + 1e-12:
        raise NoSolutionError(f"phase {dphi} rad exceeds the unambiguous range 2πd/λ")
    return float(np.arcsin(np.clip(s, -1.0, 1.0)))


@dataclass(frozen=True)
class PointTarget:
    range: float
    velocity: float = 0.0
    azimuth: float = 0.0
    elevation: float = 0.0
    amplitude: float = 1.0


@dataclass(frozen=True, eq=False)
class RadarCube:
    """Complex samples indexed [sample][chirp][antenna]."""

    samples: np.ndarray
    config: ChirpConfig
    timestamp: float = 0.0

    def __post_init__(self):
        expected = (self.config.n_samples, self.config.n_chirps, self.config.n_antennas)
        if self.samples.shape != expected:
            raise LengthMismatchError(f"cube shape {self.samples.shape} does not match config {expected}")


def antenna_phases(cfg: ChirpConfig, azimuth: float, elevation: float) -> np.ndarray:
    """Receive phase lead per element; horizontal offsets lie along +y, vertical along +z."""
    offsets = np.asarray(cfg.antennas, dtype=float)
    path = offsets[:, 0] * np.cos(elevation) * np.sin(azimuth) + offsets[:, 1] * np.sin(elevation)
    return 2.0 * np.pi * cfg.spacing * path / cfg.wavelength


def synthesize_cube(
    cfg: ChirpConfig,
    targets: List[PointTarget],
    noise_std: float = 0.0,
    rng: Optional[np.random.Generator] = None,
    timestamp: float = 0.0,
) -> RadarCube:
    """Point scatterers as delayed, Doppler-shifted, per-antenna phase-shifted chirps plus white noise."""
    t = (np.arange(cfg.n_samples) / cfg.sample_rate)[:, None, None]
    chirp_start = (np.arange(cfg.n_chirps) * cfg.chirp_duration)[None, :, None]
    tx = np.broadcast_to(gen_chirp(cfg, t), (cfg.n_samples, cfg.n_chirps, cfg.n_antennas))

    rx = np.zeros(tx.shape, dtype=complex)
    for target in targets:
        delay = 2.0 * (target.range + target.velocity * chirp_start) / SPEED_OF_LIGHT
        steering = np.exp(1j * antenna_phases(cfg, target.azimuth, target.elevation))[None, None, :]
        rx += target.amplitude * gen_chirp(cfg, t - delay) * steering

    samples = mix(tx, rx)
    if noise_std > 0.0:
        rng = rng if rng is not None else np.random.default_rng()
        noise = rng.standard_normal(samples.shape) + 1j * rng.standard_normal(samples.shape)
        samples = samples + noise * (noise_std / np.sqrt(2.0))
    return RadarCube(samples=samples, config=cfg, timestamp=timestamp)
