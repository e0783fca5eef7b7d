from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field


class MetricsReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    run: str = ""
    backend: str = ""
    n_samples: int = Field(0, ge=0)
    mae_position: float = Field(description="norm of per-axis MAE [m]")
    rmse_position: float = Field(description="norm of per-axis RMSE [m]")
    rmse_attitude: float = Field(description="norm of per-axis Euler RMSE [deg]")
    rmse_velocity: float = Field(description="norm of per-axis RMSE [m/s]")
    final_drift_pct: float
    traveled_distance: float = Field(ge=0, description="[m], from ground truth")
    nees_mean: Optional[float] = None
    nees_inside: Optional[float] = Field(None, description="fraction of NEES samples inside the 95% band")
    nees_bounds: Optional[Tuple[float, float]] = None


class NeesSummary(BaseModel):
    """Position NEES averaged sample-wise over Monte-Carlo runs."""

    model_config = ConfigDict(frozen=True)

    n_runs: int = Field(ge=1)
    n_samples: int = Field(ge=0, description="samples shared by every run")
    average_nees: float
    inside: float = Field(description="fraction of averaged samples inside the run-scaled 95% band")
    bounds: Tuple[float, float]


class ComparisonSummary(BaseModel):
    datasets: List[str]
    ekf_mean: float
    ekf_std: float
    fg_mean: float
    fg_std: float
    relative_gap: float = Field(description="|ekf_mean − fg_mean| / max of the two")
    ekf_nees: Optional[NeesSummary] = None
    fg_nees: Optional[NeesSummary] = None
