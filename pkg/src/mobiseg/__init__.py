"""Transport-mode inference from location and activity traces."""

from .model import (
    ActivityLabel,
    ActivityWindowCounts,
    LocationSample,
    PipelineConfig,
    ScheduleTrip,
    Segment,
    StationRecord,
    TrainStop,
    TransitNetwork,
    VehicleType,
    load_network,
    load_schedule,
    validate_network,
)

__version__ = "0.1.0"

__all__ = [
    "ActivityLabel",
    "ActivityWindowCounts",
    "LocationSample",
    "PipelineConfig",
    "ScheduleTrip",
    "Segment",
    "StationRecord",
    "TrainStop",
    "TransitNetwork",
    "VehicleType",
    "load_network",
    "load_schedule",
    "validate_network",
]
