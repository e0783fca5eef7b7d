from pydantic import BaseModel, ConfigDict, Field


class FgConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    window_size: int = Field(10, ge=2, description="IMU states kept in the sliding window")
    dcs_doppler: float = Field(1.0, gt=0, description="DCS Φ for Doppler factors")
    dcs_distance: float = Field(1.0, gt=0, description="DCS Φ for trail distance factors")
    dcs_landmark: float = Field(1.0, gt=0, description="DCS Φ for landmark factors")
    initial_lambda: float = Field(1e-4, gt=0)
    max_iterations: int = Field(50, ge=1)
    gradient_tolerance: float = Field(1e-8, gt=0, description="stop once the 2-norm of Jᵀr drops below")
    relative_tolerance: float = Field(1e-10, gt=0)
    max_lambda: float = Field(1e10, gt=0)
    damping: float = Field(1e-9, gt=0, description="added to a singular block before marginal inversion")
