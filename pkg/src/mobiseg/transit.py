"""Public-transport recognition against local station and schedule databases.

Metro rides are recognized from the stations nearest to the last fix before
and the first fix after an underground blackout. Vehicle segments are later
relabeled bus or tram when a scheduled trip matches their endpoints and
times, or train when both endpoints sit next to stops of one rail line.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Iterator, Sequence

from .geo import average_speed_kmh, distance_m, station_path_distance_m
from .model import (
    ActivityLabel,
    LocationSample,
    PipelineConfig,
    ScheduleTrip,
    Segment,
    StationRecord,
    TrainStop,
    TransitNetwork,
    VehicleType,
)

logger = logging.getLogger(__name__)

MAX_TRANSFERS = 2


@dataclass(frozen=True)
class MetroRoute:
    line_sequence: tuple[tuple[str, tuple[str, ...]], ...]
    stations: tuple[StationRecord, ...]
    transfers: int
    distance_m: float

    def __post_init__(self) -> None:
        if not self.stations:
            raise ValueError("a metro route traverses at least one station")
        if self.transfers != len(self.line_sequence) - 1:
            raise ValueError("transfers must equal the number of line legs minus one")

    @property
    def line(self) -> str:
        return self.line_sequence[0][0]

    @property
    def station_names(self) -> list[str]:
        return [s.name for s in self.stations]


def nearest_station(
    lat: float, lon: float, radius_m: float, network: TransitNetwork
) -> StationRecord | None:
    """Closest metro station within ``radius_m``; ties keep database order."""
    if radius_m <= 0:
        raise ValueError("radius must be positive")
    best = None
    best_d = float("inf")
    for record in network.metro_stations:
        d = distance_m(lat, lon, record.latitude, record.longitude)
        if d <= radius_m and d < best_d:
            best, best_d = record, d
    return best


def _position(names: Sequence[str], name: str) -> int:
    key = name.casefold()
    for i, n in enumerate(names):
        if n.casefold() == key:
            return i
    raise KeyError(name)


def _slice(names: Sequence[str], start: str, end: str) -> tuple[str, ...]:
    i, j = _position(names, start), _position(names, end)
    if i <= j:
        return tuple(names[i : j + 1])
    return tuple(reversed(names[j : i + 1]))


def _serves(network: TransitNetwork, line: str, name: str) -> bool:
    try:
        _position(network.line_orders[line], name)
    except KeyError:
        return False
    return True


def interchanges(
    network: TransitNetwork, from_line: str, to_line: str, radius_m: float
) -> list[tuple[str, str]]:
    """Stations where a rider can change from ``from_line`` to ``to_line``.

    Returns ``(name on from_line, name on to_line)`` pairs. A station name served
    by both lines is an interchange; so is a ``from_line`` station whose
    connections list ``to_line``, paired with the nearest ``to_line`` station
    within ``radius_m``.
    """
    result: list[tuple[str, str]] = []
    to_names = network.line_orders.get(to_line, [])
    for name in network.line_orders.get(from_line, []):
        if _serves(network, to_line, name):
            pair = (name, to_names[_position(to_names, name)])
        else:
            record = network.station(from_line, name)
            if record is None or to_line not in record.connecting_lines:
                continue
            best = None
            best_d = radius_m
            for other in to_names:
                target = network.station(to_line, other)
                if target is None:
                    continue
                d = distance_m(record.latitude, record.longitude, target.latitude, target.longitude)
                if d <= best_d:
                    best, best_d = other, d
            if best is None:
                continue
            pair = (name, best)
        if pair not in result:
            result.append(pair)
    return result


def _enumerate_legs(
    network: TransitNetwork,
    line: str,
    board: str,
    dest: str,
    visited: tuple[str, ...],
    transfers_left: int,
    radius_m: float,
) -> Iterator[list[tuple[str, str, str]]]:
    if _serves(network, line, dest):
        yield [(line, board, dest)]
    if transfers_left == 0:
        return
    for next_line in network.line_orders:
        if next_line in visited:
            continue
        for here, there in interchanges(network, line, next_line, radius_m):
            if here.casefold() == board.casefold():
                continue
            for rest in _enumerate_legs(
                network, next_line, there, dest, visited + (next_line,), transfers_left - 1, radius_m
            ):
                yield [(line, board, here)] + rest


def build_route(network: TransitNetwork, legs: Sequence[tuple[str, str, str]]) -> MetroRoute:
    """Assemble a :class:`MetroRoute` from ``(line, board, alight)`` legs."""
    sequence = []
    stations: list[StationRecord] = []
    for line, start, end in legs:
        names = _slice(network.line_orders[line], start, end)
        sequence.append((line, names))
        for i, name in enumerate(names):
            if i == 0 and stations and stations[-1].name.casefold() == name.casefold():
                continue
            record = network.station(line, name)
            if record is None:
                raise KeyError(f"no station record for {name!r} on line {line}")
            stations.append(record)
    coords = [(s.latitude, s.longitude) for s in stations]
    return MetroRoute(
        line_sequence=tuple(sequence),
        stations=tuple(stations),
        transfers=len(sequence) - 1,
        distance_m=station_path_distance_m(coords),
    )


def find_metro_route(
    network: TransitNetwork,
    origin: str,
    destination: str,
    max_transfers: int = MAX_TRANSFERS,
    interchange_radius_m: float = 150.0,
) -> MetroRoute | None:
    """Shortest route between two station names.

    A direct ride is used whenever both stations share a line. Otherwise every
    line combination with up to ``max_transfers`` changes is traced and the
    one with the smallest path length wins.
    """
    origin_lines = network.lines_serving(origin)
    direct = [line for line in origin_lines if _serves(network, line, destination)]
    candidates: list[list[tuple[str, str, str]]] = []
    if direct:
        candidates = [[(line, origin, destination)] for line in direct]
    else:
        for line in origin_lines:
            candidates.extend(
                _enumerate_legs(
                    network, line, origin, destination, (line,), max_transfers, interchange_radius_m
                )
            )
    best = None
    for legs in candidates:
        try:
            route = build_route(network, legs)
        except KeyError:
            logger.warning("skipping route with missing station records: %s", legs)
            continue
        if best is None or (route.distance_m, route.transfers) < (best.distance_m, best.transfers):
            best = route
    return best


def recognize_metro(
    loc1: LocationSample,
    loc2: LocationSample,
    network: TransitNetwork,
    config: PipelineConfig | None = None,
) -> tuple[MetroRoute, str] | None:
    """Trace the metro ride between the fixes around an underground episode.

    Returns ``None`` (a false positive) when either endpoint has no station
    within the search radius or both resolve to the same station name.
    """
    config = config or PipelineConfig()
    radius = config.station_search_radius_m
    orig = nearest_station(loc1.latitude, loc1.longitude, radius, network)
    dest = nearest_station(loc2.latitude, loc2.longitude, radius, network)
    if orig is None or dest is None:
        return None
    if orig.name.casefold() == dest.name.casefold():
        return None
    route = find_metro_route(network, orig.name, dest.name, interchange_radius_m=radius)
    if route is None:
        return None
    return route, route.line


def metro_segment(route: MetroRoute, loc1: LocationSample, loc2: LocationSample) -> Segment:
    """Metro segment whose trail is the traversed stations.

    Every station point carries the entry time; the last location carries the
    exit time so the segment spans the whole blackout.
    """
    points = tuple(
        LocationSample(s.latitude, s.longitude, None, loc1.timestamp) for s in route.stations
    )
    last = route.stations[-1]
    last_location = LocationSample(last.latitude, last.longitude, None, loc2.timestamp)
    duration = (loc2.timestamp - loc1.timestamp) // 1000
    speed = average_speed_kmh(route.distance_m, duration) if duration > 0 else 0.0
    return Segment(
        activity=ActivityLabel.METRO,
        first_location=points[0],
        last_location=last_location,
        total_distance=route.distance_m,
        total_duration=duration,
        average_speed=speed,
        location_points=points,
        line=route.line,
    )


def _trip_matches(
    trip: ScheduleTrip,
    origin: LocationSample,
    destination: LocationSample,
    departure_epoch_s: int,
    arrival_epoch_s: int,
    config: PipelineConfig,
) -> bool:
    radius = config.schedule_match_radius_m
    if distance_m(origin.latitude, origin.longitude, *trip.origin_stop) > radius:
        return False
    if distance_m(destination.latitude, destination.longitude, *trip.destination_stop) > radius:
        return False
    if abs(trip.departure_epoch - departure_epoch_s) >= config.departure_margin_s:
        return False
    return abs(trip.arrival_epoch - arrival_epoch_s) < config.arrival_margin_s


def find_trip(
    origin: LocationSample,
    destination: LocationSample,
    departure_epoch_s: int,
    arrival_epoch_s: int,
    schedule: Sequence[ScheduleTrip],
    config: PipelineConfig | None = None,
) -> ScheduleTrip | None:
    """First scheduled trip, in schedule order, consistent with the ride."""
    config = config or PipelineConfig()
    if not departure_epoch_s < arrival_epoch_s:
        raise ValueError("departure must precede arrival")
    for trip in schedule:
        if _trip_matches(trip, origin, destination, departure_epoch_s, arrival_epoch_s, config):
            return trip
    return None


def match_bus_or_tram(
    origin: LocationSample,
    destination: LocationSample,
    departure_epoch_s: int,
    arrival_epoch_s: int,
    schedule: Sequence[ScheduleTrip],
    config: PipelineConfig | None = None,
) -> VehicleType | None:
    trip = find_trip(origin, destination, departure_epoch_s, arrival_epoch_s, schedule, config)
    return None if trip is None else trip.vehicle_type


def _nearest_train_stop(lat: float, lon: float, stops: Sequence[TrainStop]) -> tuple[TrainStop | None, float]:
    best = None
    best_d = float("inf")
    for stop in stops:
        d = distance_m(stop.latitude, stop.longitude, lat, lon)
        if d < best_d:
            best, best_d = stop, d
    return best, best_d


def match_train(
    origin: LocationSample,
    destination: LocationSample,
    network: TransitNetwork,
    config: PipelineConfig | None = None,
) -> str | None:
    """Rail line shared by the stops nearest to both endpoints, if close enough."""
    config = config or PipelineConfig()
    radius = config.train_station_radius_m
    first, d1 = _nearest_train_stop(origin.latitude, origin.longitude, network.train_stops)
    second, d2 = _nearest_train_stop(destination.latitude, destination.longitude, network.train_stops)
    if first is None or second is None:
        return None
    if d1 < radius and d2 < radius and first.line == second.line:
        return first.line
    return None


def post_process(
    segments: Sequence[Segment],
    schedule: Sequence[ScheduleTrip],
    network: TransitNetwork,
    config: PipelineConfig | None = None,
) -> list[Segment]:
    """Relabel vehicle segments as bus, tram or train where the databases agree.

    The ride origin is the vehicle segment's own first fix when it follows a
    still segment (or opens the day); otherwise the preceding segment's first
    fix is used, since slow acceleration away from a stop is often detected as
    walking.
    """
    config = config or PipelineConfig()
    result = list(segments)
    for i, segment in enumerate(segments):
        if segment.activity is not ActivityLabel.VEHICLE:
            continue
        if i == 0 or segments[i - 1].activity is ActivityLabel.STILL:
            origin = segment.first_location
        else:
            origin = segments[i - 1].first_location
        destination = segment.last_location
        departure = origin.timestamp // 1000
        arrival = destination.timestamp // 1000
        if departure < arrival:
            trip = find_trip(origin, destination, departure, arrival, schedule, config)
            if trip is not None:
                result[i] = replace(segment, activity=trip.vehicle_type.label, line=trip.line)
                continue
        line = match_train(origin, destination, network, config)
        if line is not None:
            result[i] = replace(segment, activity=ActivityLabel.TRAIN, line=line)
    return result
