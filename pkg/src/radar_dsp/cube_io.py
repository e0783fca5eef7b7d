"""Binary radar cube files.

Layout (little endian): a fixed header, N_ant (horizontal, vertical) antenna
offsets as float64 pairs, then complex64 samples ordered
[antenna][chirp][sample].
"""
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.common.errors import DatasetError
from .schemas import ChirpConfig
from .signal import RadarCube

CUBE_MAGIC = b"RCUB"
CUBE_VERSION = 1

HEADER_DTYPE = np.dtype([
    ("magic", "S4"),
    ("version", "<u4"),
    ("start_frequency", "<f8"),
    ("bandwidth", "<f8"),
    ("chirp_duration", "<f8"),
    ("sample_rate", "<f8"),
    ("element_spacing", "<f8"),
    ("timestamp", "<f8"),
    ("n_samples", "<u4"),
    ("n_chirps", "<u4"),
    ("n_antennas", "<u4"),
])


def write_cube(path: Union[str, Path], cube: RadarCube) -> None:
    cfg = cube.config
    header = np.zeros(1, dtype=HEADER_DTYPE)
    header["magic"] = CUBE_MAGIC
    header["version"] = CUBE_VERSION
    header["start_frequency"] = cfg.start_frequency
    header["bandwidth"] = cfg.bandwidth
    header["chirp_duration"] = cfg.chirp_duration
    header["sample_rate"] = cfg.sample_rate
    header["element_spacing"] = cfg.spacing
    header["timestamp"] = cube.timestamp
    header["n_samples"] = cfg.n_samples
    header["n_chirps"] = cfg.n_chirps
    header["n_antennas"] = cfg.n_antennas

    offsets = np.asarray(cfg.antennas, dtype="<f8")
    samples = np.ascontiguousarray(np.transpose(cube.samples, (2, 1, 0)), dtype="<c8")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(offsets.tobytes())
        f.write(samples.tobytes())


def read_cube(path: Union[str, Path], cfg: Optional[ChirpConfig] = None) -> RadarCube:
    """Load a cube; waveform fields come from the header, the rest from `cfg`."""
    raw = Path(path).read_bytes()
    if len(raw) < HEADER_DTYPE.itemsize:
        raise DatasetError(f"{path}: truncated cube header")
    header = np.frombuffer(raw, dtype=HEADER_DTYPE, count=1)[0]
    if header["magic"] != CUBE_MAGIC:
        raise DatasetError(f"{path}: not a radar cube file")
    if header["version"] != CUBE_VERSION:
        raise DatasetError(f"{path}: cube version {header['version']} is not supported")

    n_s, n_c, n_a = int(header["n_samples"]), int(header["n_chirps"]), int(header["n_antennas"])
    offset = HEADER_DTYPE.itemsize
    expected = offset + 16 * n_a + 8 * n_s * n_c * n_a
    if len(raw) != expected:
        raise DatasetError(f"{path}: expected {expected} bytes, found {len(raw)}")

    antennas = np.frombuffer(raw, dtype="<f8", count=2 * n_a, offset=offset).reshape(n_a, 2)
    samples = np.frombuffer(raw, dtype="<c8", count=n_s * n_c * n_a, offset=offset + 16 * n_a)

    base = cfg if cfg is not None else ChirpConfig()
    config = ChirpConfig(
        **{
            **base.model_dump(),
            "start_frequency": float(header["start_frequency"]),
            "bandwidth": float(header["bandwidth"]),
            "chirp_duration": float(header["chirp_duration"]),
            "sample_rate": float(header["sample_rate"]),
            "element_spacing": float(header["element_spacing"]),
            "n_samples": n_s,
            "n_chirps": n_c,
            "antennas": [tuple(a) for a in antennas.tolist()],
        }
    )
    cube = samples.reshape(n_a, n_c, n_s).transpose(2, 1, 0).astype(complex)
    return RadarCube(samples=cube, config=config, timestamp=float(header["timestamp"]))
