from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.common.enums import CalibrationMode, MeasurementClass


class EkfConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    chi2_percentile: float = Field(0.95, gt=0, lt=1)
    calibration: CalibrationMode = CalibrationMode.ONLINE
    update_order: List[MeasurementClass] = Field(
        default_factory=lambda: [MeasurementClass.DISTANCE, MeasurementClass.DOPPLER, MeasurementClass.LANDMARK]
    )
    # trails and landmarks go in as one stacked update at the position of the first of the two in update_order
    joint_trail_landmark: bool = False

    @field_validator("update_order")
    @classmethod
    def unique_classes(cls, order):
        if len(set(order)) != len(order):
            raise ValueError("update_order lists a measurement class twice")
        return order
