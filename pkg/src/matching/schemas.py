from pydantic import BaseModel, ConfigDict, Field


class MatchingConfig(BaseModel):
    """Front-end gates shared by both backends."""

    model_config = ConfigDict(frozen=True)

    trail_length: int = Field(7, ge=1, description="N: consecutive matches before promotion, clone buffer size")
    max_dist: float = Field(1.0, ge=0, description="gate on aligned Euclidean distance [m]")
    min_intensity: float = Field(0.0, ge=0, description="gate on current-point intensity")
    landmark_max_dist: float = Field(1.0, ge=0, description="gate for landmark association [m]")
    max_landmarks: int = Field(20, ge=0, description="M: persistent landmark capacity")
    sentinel_cost: float = Field(1e6, gt=0, description="padding cost for rectangular assignment")
