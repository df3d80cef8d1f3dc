"""Calories burned and CO2 saved, per segment and per day."""

from __future__ import annotations

from typing import Iterable, NamedTuple

from .model import ActivityLabel, PipelineConfig, Segment

_DEFAULT = PipelineConfig()

CO2_LABELS = frozenset(
    {ActivityLabel.METRO, ActivityLabel.BUS, ActivityLabel.TRAM, ActivityLabel.TRAIN}
)


class DailyTotals(NamedTuple):
    kcal: float
    co2_g: float

    def __add__(self, other: "DailyTotals") -> "DailyTotals":  # type: ignore[override]
        return DailyTotals(self.kcal + other.kcal, self.co2_g + other.co2_g)


def calories_kcal(
    duration_s: float, speed_kmh: float, weight_kg: float, config: PipelineConfig = _DEFAULT
) -> float:
    """Walking energy from MET values: 1 MET is 1 kcal per kg per hour."""
    if duration_s < 0:
        raise ValueError("duration must be non-negative")
    if weight_kg <= 0:
        raise ValueError("weight must be positive")
    met = config.met_slow if speed_kmh < config.met_speed_threshold_kmh else config.met_fast
    return met * weight_kg * (duration_s / 3600.0)


def co2_saved_g(distance_m: float, config: PipelineConfig = _DEFAULT) -> float:
    if distance_m < 0:
        raise ValueError("distance must be non-negative")
    return config.co2_g_per_km * (distance_m / 1000.0)


def daily_totals(
    segments: Iterable[Segment], weight_kg: float, config: PipelineConfig = _DEFAULT
) -> DailyTotals:
    """Calories over walking segments and CO2 over public-transport segments."""
    kcal = 0.0
    co2 = 0.0
    for segment in segments:
        if segment.activity is ActivityLabel.ON_FOOT:
            kcal += calories_kcal(segment.total_duration, segment.average_speed, weight_kg, config)
        elif segment.activity in CO2_LABELS:
            co2 += co2_saved_g(segment.total_distance, config)
    return DailyTotals(kcal, co2)
