from typing import List, Optional, Tuple

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    model_validator,
)

from src.common.enums import CfarGeometry, WindowKind
from src.common.utils import SPEED_OF_LIGHT


def _default_antennas() -> List[Tuple[float, float]]:
    # 2 TX x 4 RX virtual array laid out on one horizontal row
    return [(float(i), 0.0) for i in range(8)]


class ChirpConfig(BaseModel):
    """Waveform and array parameters of one FMCW frame."""

    model_config = ConfigDict(frozen=True)

    start_frequency: float = Field(77e9, gt=0, description="f_c [Hz]")
    bandwidth: float = Field(1e9, gt=0, description="B [Hz]")
    chirp_duration: float = Field(25.6e-6, gt=0, description="T_c [s]")
    n_samples: int = Field(256, ge=1, description="N_s samples per chirp")
    n_chirps: int = Field(128, ge=1, description="N_c chirps per frame")
    sample_rate: float = Field(10e6, gt=0, description="ADC rate f_s [Hz]")
    element_spacing: Optional[float] = Field(None, gt=0, description="d [m]; half wavelength when unset")
    antennas: List[Tuple[float, float]] = Field(default_factory=_default_antennas, min_length=1)
    window: WindowKind = WindowKind.RECTANGULAR
    angle_pad: int = Field(8, ge=1, description="zero-padding factor of the angle FFT")

    @model_validator(mode="after")
    def check_timing(self):
        if self.n_samples / self.sample_rate > self.chirp_duration * (1.0 + 1e-9):
            raise ValueError("N_s / f_s must not exceed the chirp duration")
        for h, v in self.antennas:
            if h != round(h) or v != round(v):
                raise ValueError("antenna offsets must be integer multiples of the element spacing")
        return self

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.start_frequency

    @property
    def slope(self) -> float:
        return self.bandwidth / self.chirp_duration

    @property
    def spacing(self) -> float:
        return self.element_spacing if self.element_spacing is not None else 0.5 * self.wavelength

    @property
    def n_antennas(self) -> int:
        return len(self.antennas)


class CfarConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    train_cells: int = Field(16, ge=2, description="N_r training cells per window")
    guard_cells: int = Field(2, ge=0, description="guard cells per side")
    pfa: float = Field(1e-3, gt=0, lt=1, description="desired false alarm probability")
    geometry: CfarGeometry = CfarGeometry.CROSS

    @model_validator(mode="after")
    def check_split(self):
        arms = 4 if self.geometry == CfarGeometry.CROSS else 2
        if self.train_cells % arms:
            raise ValueError(
                f"{self.geometry.value} window needs train_cells divisible by {arms}, got {self.train_cells}"
            )
        return self

    @property
    def cells_per_arm(self) -> int:
        arms = 4 if self.geometry == CfarGeometry.CROSS else 2
        return self.train_cells // arms
