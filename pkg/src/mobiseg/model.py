"""Domain types shared by the pipeline, transit matcher, metrics and store."""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence


class ActivityLabel(str, enum.Enum):
    STILL = "still"
    ON_FOOT = "on_foot"
    BICYCLE = "bicycle"
    VEHICLE = "vehicle"
    UNKNOWN = "unknown"
    METRO = "metro"
    BUS = "bus"
    TRAM = "tram"
    TRAIN = "train"

    @classmethod
    def parse(cls, text: str) -> "ActivityLabel":
        """Parse a serialized label. ``"renfe"`` is accepted as an alias of train."""
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower()
        if key == "renfe":
            return cls.TRAIN
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown activity label: {text!r}") from None

    @property
    def is_raw(self) -> bool:
        return self in RAW_LABELS

    @property
    def is_transit(self) -> bool:
        return self in TRANSIT_LABELS

    def __str__(self) -> str:
        return self.value


RAW_LABELS = frozenset(
    {
        ActivityLabel.STILL,
        ActivityLabel.ON_FOOT,
        ActivityLabel.BICYCLE,
        ActivityLabel.VEHICLE,
        ActivityLabel.UNKNOWN,
    }
)
TRANSIT_LABELS = frozenset(
    {ActivityLabel.METRO, ActivityLabel.BUS, ActivityLabel.TRAM, ActivityLabel.TRAIN}
)


class VehicleType(str, enum.Enum):
    BUS = "bus"
    TRAM = "tram"

    @classmethod
    def parse(cls, text: str) -> "VehicleType":
        if isinstance(text, cls):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(f"unknown vehicle type: {text!r}") from None

    @property
    def label(self) -> ActivityLabel:
        return ActivityLabel(self.value)


def _check_coordinates(latitude: float, longitude: float) -> None:
    if not -90.0 <= latitude <= 90.0:
        raise ValueError(f"latitude out of range: {latitude}")
    if not -180.0 <= longitude <= 180.0:
        raise ValueError(f"longitude out of range: {longitude}")


@dataclass(frozen=True)
class LocationSample:
    """One positioning fix.

    ``accuracy`` is the 68% confidence radius in meters. It is ``None`` only for
    samples read back from segment files, which do not carry it.
    """

    latitude: float
    longitude: float
    accuracy: float | None
    timestamp: int  # epoch milliseconds
    wifi_enabled: bool = False

    def __post_init__(self) -> None:
        _check_coordinates(self.latitude, self.longitude)
        if self.accuracy is not None and not self.accuracy > 0:
            raise ValueError(f"accuracy must be positive, got {self.accuracy}")

    def same_position(self, other: "LocationSample") -> bool:
        # exact float equality, as the repeated-fix detection requires
        return self.latitude == other.latitude and self.longitude == other.longitude


@dataclass
class ActivityWindowCounts:
    vehicle_count: int = 0
    bicycle_count: int = 0
    on_foot_count: int = 0
    still_count: int = 0
    unknown_count: int = 0

    def __post_init__(self) -> None:
        if min(self.as_tuple()) < 0:
            raise ValueError("activity counts must be non-negative")

    def as_tuple(self) -> tuple[int, int, int, int, int]:
        return (
            self.vehicle_count,
            self.bicycle_count,
            self.on_foot_count,
            self.still_count,
            self.unknown_count,
        )

    def total(self) -> int:
        return sum(self.as_tuple())

    def get(self, label: ActivityLabel) -> int:
        return getattr(self, _COUNT_FIELDS[label])


_COUNT_FIELDS = {
    ActivityLabel.VEHICLE: "vehicle_count",
    ActivityLabel.BICYCLE: "bicycle_count",
    ActivityLabel.ON_FOOT: "on_foot_count",
    ActivityLabel.STILL: "still_count",
    ActivityLabel.UNKNOWN: "unknown_count",
}


@dataclass(frozen=True)
class Segment:
    """A merged activity interval with its location trail."""

    activity: ActivityLabel
    first_location: LocationSample
    last_location: LocationSample
    total_distance: float  # meters
    total_duration: int  # seconds
    average_speed: float  # km/h
    location_points: tuple[LocationSample, ...] = ()
    line: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "activity", ActivityLabel.parse(self.activity))
        object.__setattr__(self, "location_points", tuple(self.location_points))
        if self.total_duration < 0:
            raise ValueError("total_duration must be >= 0")
        if self.total_distance < 0:
            raise ValueError("total_distance must be >= 0")
        if self.average_speed < 0:
            raise ValueError("average_speed must be >= 0")
        if self.first_location.timestamp > self.last_location.timestamp:
            raise ValueError("first_location is later than last_location")
        if self.activity is ActivityLabel.STILL:
            if self.total_distance != 0 or self.average_speed != 0:
                raise ValueError("a still segment has zero distance and speed")
            if len(self.location_points) != 1:
                raise ValueError("a still segment holds exactly one location point")
        if self.line is not None and not self.activity.is_transit:
            raise ValueError(f"line {self.line!r} given for a {self.activity} segment")


@dataclass(frozen=True)
class StationRecord:
    id: str
    line: str
    name: str
    connections: str
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        _check_coordinates(self.latitude, self.longitude)

    @property
    def connecting_lines(self) -> tuple[str, ...]:
        return tuple(part.strip() for part in self.connections.split("-") if part.strip())


@dataclass(frozen=True)
class TrainStop:
    line: str
    latitude: float
    longitude: float

    def __post_init__(self) -> None:
        _check_coordinates(self.latitude, self.longitude)


@dataclass
class TransitNetwork:
    metro_stations: list[StationRecord] = field(default_factory=list)
    line_orders: dict[str, list[str]] = field(default_factory=dict)
    train_stops: list[TrainStop] = field(default_factory=list)

    def station(self, line: str, name: str) -> StationRecord | None:
        for record in self.metro_stations:
            if record.line == line and record.name == name:
                return record
        return None

    def lines_serving(self, name: str) -> list[str]:
        """Lines whose ordered station list contains ``name`` (case-insensitive)."""
        key = name.casefold()
        return [
            line
            for line, names in self.line_orders.items()
            if any(n.casefold() == key for n in names)
        ]


@dataclass(frozen=True)
class ScheduleTrip:
    vehicle_type: VehicleType
    line: str
    origin_stop: tuple[float, float]
    destination_stop: tuple[float, float]
    departure_epoch: int
    arrival_epoch: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "vehicle_type", VehicleType.parse(self.vehicle_type))
        object.__setattr__(self, "origin_stop", tuple(map(float, self.origin_stop)))
        object.__setattr__(
            self, "destination_stop", tuple(map(float, self.destination_stop))
        )
        _check_coordinates(*self.origin_stop)
        _check_coordinates(*self.destination_stop)
        if not self.departure_epoch < self.arrival_epoch:
            raise ValueError("departure_epoch must precede arrival_epoch")

    def to_dict(self) -> dict[str, Any]:
        return {
            "vehicle_type": self.vehicle_type.value,
            "line": self.line,
            "origin_stop": list(self.origin_stop),
            "destination_stop": list(self.destination_stop),
            "departure_epoch": self.departure_epoch,
            "arrival_epoch": self.arrival_epoch,
        }


@dataclass(frozen=True)
class PipelineConfig:
    window_seconds: int = 120
    location_interval_seconds: int = 20
    gps_interval_seconds: int = 5
    activity_interval_seconds: int = 5
    good_accuracy_m: float = 200.0
    bad_accuracy_m: float = 1000.0
    block_radius_m: float = 100.0
    max_on_foot_speed_kmh: float = 10.0
    station_search_radius_m: float = 150.0
    schedule_match_radius_m: float = 200.0
    departure_margin_s: int = 300
    arrival_margin_s: int = 180
    train_station_radius_m: float = 100.0
    gps_max_windows: int = 2
    badloc_trigger: int = 4
    reploc_trigger: int = 2
    earth_radius_m: float = 6_371_000.0
    co2_g_per_km: float = 140.0
    met_slow: float = 2.3
    met_fast: float = 2.9
    met_speed_threshold_kmh: float = 2.7

    def __post_init__(self) -> None:
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError(f"{f.name} must be numeric, got {value!r}")
            if not value > 0:
                raise ValueError(f"{f.name} must be strictly positive, got {value}")
        if not self.good_accuracy_m < self.bad_accuracy_m:
            raise ValueError("good_accuracy_m must be below bad_accuracy_m")

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**values)

    @classmethod
    def from_json(cls, path: str | Path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes: Any) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def validate_network(network: TransitNetwork) -> list[str]:
    """Return human-readable invariant violations; an empty list means valid."""
    violations = []
    seen: dict[tuple[str, str], int] = {}
    for record in network.metro_stations:
        key = (record.line, record.name)
        seen[key] = seen.get(key, 0) + 1
    for (line, name), n in seen.items():
        if n > 1:
            violations.append(f"line {line}: station {name!r} appears {n} times")
    for line, names in network.line_orders.items():
        for name in names:
            n = seen.get((line, name), 0)
            if n == 0:
                violations.append(f"line {line}: station {name!r} has no station record")
    return violations


# -- file formats -----------------------------------------------------------


def parse_station_database(
    data: Mapping[str, Any],
) -> tuple[list[StationRecord], list[TrainStop]]:
    metro = [
        StationRecord(
            id=str(item["id"]),
            line=str(item["line"]),
            name=str(item["name"]),
            connections=str(item.get("connections") or ""),
            latitude=float(item["lat"]),
            longitude=float(item["lon"]),
        )
        for item in data.get("metro", [])
    ]
    renfe = [
        TrainStop(
            line=str(item["line"]),
            latitude=float(item["lat"]),
            longitude=float(item["lon"]),
        )
        for item in data.get("renfe", [])
    ]
    return metro, renfe


def load_network(
    stations_path: str | Path | None = None, line_orders_path: str | Path | None = None
) -> TransitNetwork:
    """Load the station database and line-order files.

    Either path may be omitted to use the bundled Barcelona fixture (L3 and L5
    metro lines plus a handful of commuter-rail stops).
    """
    stations = _load_json(stations_path, "stations.json")
    orders = _load_json(line_orders_path, "line_orders.json")
    metro, renfe = parse_station_database(stations)
    line_orders = {str(k): [str(n) for n in v] for k, v in orders.items()}
    return TransitNetwork(metro_stations=metro, line_orders=line_orders, train_stops=renfe)


def parse_schedule(items: Iterable[Mapping[str, Any]]) -> list[ScheduleTrip]:
    return [
        ScheduleTrip(
            vehicle_type=item["vehicle_type"],
            line=str(item["line"]),
            origin_stop=tuple(item["origin_stop"]),
            destination_stop=tuple(item["destination_stop"]),
            departure_epoch=int(item["departure_epoch"]),
            arrival_epoch=int(item["arrival_epoch"]),
        )
        for item in items
    ]


def load_schedule(path: str | Path | None = None) -> list[ScheduleTrip]:
    return parse_schedule(_load_json(path, "schedule.json"))


def dump_schedule(trips: Sequence[ScheduleTrip], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([t.to_dict() for t in trips], fh, indent=1, ensure_ascii=False)
        fh.write("\n")


def _load_json(path: str | Path | None, bundled: str) -> Any:
    if path is None:
        text = resources.files("mobiseg.data").joinpath(bundled).read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return json.loads(text)
