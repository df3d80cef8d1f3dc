"""Deterministic synthetic traces standing in for the phone's sensor stack.

A scenario is a sequence of legs (mode, polyline, speed, radio environment).
Location fixes come every 20 s, or every 5 s while GPS is on; GPS is switched
by a pipeline run side by side with the generator, exactly as the phone
would react to its own processing. Activity labels come every 5 s.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .geo import EARTH_RADIUS_M, distance_m
from .model import LocationSample, PipelineConfig, ScheduleTrip, TransitNetwork, load_network
from .pipeline import ActivityEvent, GpsSignal, TraceEvent, TraceProcessor

MODES = ("walk", "bicycle", "car", "bus", "tram", "train", "metro", "still")
ENVIRONMENTS = ("wifi_urban", "no_wifi_road", "underground")
RAW_LABELS = ("vehicle", "bicycle", "on_foot", "still", "unknown")

_COARSE = {
    "walk": "on_foot",
    "bicycle": "bicycle",
    "car": "vehicle",
    "bus": "vehicle",
    "tram": "vehicle",
    "train": "vehicle",
    "metro": "vehicle",
    "still": "still",
}

# accuracy ranges in meters
WIFI_ACCURACY = (30.0, 150.0)
GPS_ACCURACY = (5.0, 15.0)
UNDERGROUND_ACCURACY = (1001.0, 3000.0)

ACTIVITY_OFFSET_MS = 2500

# Barcelona in December (CET)
CET = timezone(timedelta(hours=1))


@dataclass(frozen=True)
class Leg:
    mode: str
    waypoints: tuple[tuple[float, float], ...]
    speed_kmh: float = 4.5
    environment: str = "wifi_urban"
    duration_s: float | None = None  # still legs only
    stuck: bool = False  # underground: the provider keeps repeating the last good fix
    line: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "waypoints", tuple(tuple(map(float, p)) for p in self.waypoints))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.environment not in ENVIRONMENTS:
            raise ValueError(f"unknown environment {self.environment!r}")
        if not self.waypoints:
            raise ValueError("a leg needs at least one waypoint")
        if self.mode == "still":
            if self.duration_s is None or self.duration_s <= 0:
                raise ValueError("a still leg needs a positive duration_s")
        else:
            if len(self.waypoints) < 2:
                raise ValueError(f"moving leg {self.mode!r} needs at least two waypoints")
            if not self.speed_kmh > 0:
                raise ValueError("leg speed must be positive")
            if self.length_m() == 0:
                raise ValueError("moving leg has zero length")

    def length_m(self) -> float:
        pts = self.waypoints
        return sum(distance_m(*a, *b) for a, b in zip(pts[:-1], pts[1:]))

    def duration(self) -> float:
        if self.mode == "still":
            return float(self.duration_s)
        return self.length_m() / (self.speed_kmh / 3.6)

    def position(self, elapsed_s: float) -> tuple[float, float]:
        if self.mode == "still" or len(self.waypoints) == 1:
            return self.waypoints[0]
        target = min(max(elapsed_s, 0.0), self.duration()) * self.speed_kmh / 3.6
        pts = self.waypoints
        for a, b in zip(pts[:-1], pts[1:]):
            piece = distance_m(*a, *b)
            if target <= piece and piece > 0:
                f = target / piece
                return (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))
            target -= piece
        return pts[-1]


@dataclass(frozen=True)
class Scenario:
    seed: int
    legs: tuple[Leg, ...]
    activity_noise: float = 0.0
    weight_kg: float = 70.0
    start_ms: int = 0
    position_noise: float = 1.0
    gps_warmup_s: float = 0.0
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "legs", tuple(self.legs))
        if not self.legs:
            raise ValueError("a scenario needs at least one leg")
        if not 0.0 <= self.activity_noise <= 1.0:
            raise ValueError("activity_noise must be a probability")
        if self.weight_kg <= 0:
            raise ValueError("weight_kg must be positive")
        if self.position_noise < 0 or self.gps_warmup_s < 0:
            raise ValueError("noise scale and warm-up must be non-negative")

    def leg_times(self) -> list[tuple[int, int]]:
        """``(start_ms, end_ms)`` of every leg."""
        times = []
        t = float(self.start_ms)
        for leg in self.legs:
            end = t + leg.duration() * 1000.0
            times.append((int(round(t)), int(round(end))))
            t = end
        return times

    @property
    def end_ms(self) -> int:
        return self.leg_times()[-1][1]

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["legs"] = [
            {k: v for k, v in asdict(leg).items() if v is not None and v is not False}
            for leg in self.legs
        ]
        for leg in data["legs"]:
            leg["waypoints"] = [list(p) for p in leg["waypoints"]]
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Scenario":
        data = dict(data)
        legs = tuple(Leg(**leg) for leg in data.pop("legs"))
        return cls(legs=legs, **data)

    @classmethod
    def from_json(cls, path: str | Path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


@dataclass
class _Radio:
    gps_on: bool = False
    gps_since: int = 0
    last_fix: LocationSample | None = None
    events: list[TraceEvent] = field(default_factory=list)


def _displace(lat: float, lon: float, sigma_m: float, rng: np.random.Generator) -> tuple[float, float]:
    dy, dx = rng.normal(0.0, sigma_m, size=2) if sigma_m > 0 else (0.0, 0.0)
    dlat = math.degrees(dy / EARTH_RADIUS_M)
    dlon = math.degrees(dx / (EARTH_RADIUS_M * math.cos(math.radians(lat))))
    return lat + dlat, lon + dlon


def _leg_at(times: Sequence[tuple[int, int]], t_ms: int) -> int:
    for i, (_, end) in enumerate(times):
        if t_ms < end:
            return i
    return len(times) - 1


def _location(
    scenario: Scenario,
    leg: Leg,
    t_ms: int,
    leg_start: int,
    radio: _Radio,
    rng: np.random.Generator,
) -> LocationSample:
    lat, lon = leg.position((t_ms - leg_start) / 1000.0)
    gps_ready = radio.gps_on and (t_ms - radio.gps_since) >= scenario.gps_warmup_s * 1000
    env = leg.environment
    if env == "underground":
        if leg.stuck and radio.last_fix is not None:
            return replace(radio.last_fix, timestamp=t_ms)
        accuracy = rng.uniform(*UNDERGROUND_ACCURACY)
        lat, lon = _displace(lat, lon, accuracy / 2 * scenario.position_noise, rng)
        return LocationSample(lat, lon, accuracy, t_ms, True)
    wifi = env == "wifi_urban"
    if gps_ready and leg.environment != "underground":
        accuracy = rng.uniform(*GPS_ACCURACY)
    elif wifi or radio.last_fix is None:
        accuracy = rng.uniform(*WIFI_ACCURACY)
    else:
        # no Wi-Fi and no GPS fix: the provider repeats its last known location
        return replace(radio.last_fix, timestamp=t_ms, wifi_enabled=False)
    lat, lon = _displace(lat, lon, accuracy / 2 * scenario.position_noise, rng)
    return LocationSample(lat, lon, accuracy, t_ms, wifi)


def generate(scenario: Scenario, config: PipelineConfig | None = None) -> list[TraceEvent]:
    """Produce the interleaved location and activity stream of a scenario.

    Identical scenarios (seed included) produce identical traces.
    """
    config = config or PipelineConfig()
    rng = np.random.default_rng(scenario.seed)
    times = scenario.leg_times()
    end_ms = times[-1][1]
    processor = TraceProcessor(config)
    radio = _Radio()

    act_step = int(config.activity_interval_seconds * 1000)
    next_loc = scenario.start_ms
    next_act = scenario.start_ms + ACTIVITY_OFFSET_MS

    def react(signals: list[GpsSignal], t_ms: int) -> None:
        for signal in signals:
            if signal is GpsSignal.ENABLE:
                radio.gps_on, radio.gps_since = True, t_ms
            elif signal is GpsSignal.DISABLE:
                radio.gps_on = False

    while min(next_loc, next_act) < end_ms:
        if next_loc <= next_act:
            t = next_loc
            i = _leg_at(times, t)
            sample = _location(scenario, scenario.legs[i], t, times[i][0], radio, rng)
            if sample.accuracy < config.bad_accuracy_m:
                radio.last_fix = sample
            radio.events.append(sample)
            react(processor.feed(sample), t)
            interval = config.gps_interval_seconds if radio.gps_on else config.location_interval_seconds
            next_loc = t + int(interval * 1000)
        else:
            t = next_act
            label = _COARSE[scenario.legs[_leg_at(times, t)].mode]
            if scenario.activity_noise > 0 and rng.random() < scenario.activity_noise:
                others = [x for x in RAW_LABELS if x != label]
                label = others[int(rng.integers(len(others)))]
            event = ActivityEvent(label, t)
            radio.events.append(event)
            react(processor.feed(event), t)
            next_act = t + act_step
    return radio.events


# -- presets -------------------------------------------------------------------


def _epoch_ms(year: int, month: int, day: int, hour: int, minute: int) -> int:
    return int(datetime(year, month, day, hour, minute, tzinfo=CET).timestamp() * 1000)


def _offset(point: tuple[float, float], north_m: float, east_m: float) -> tuple[float, float]:
    lat, lon = point
    return (
        lat + math.degrees(north_m / EARTH_RADIUS_M),
        lon + math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(lat)))),
    )


def _timed(mode: str, waypoints, duration_s: float, **kw: Any) -> Leg:
    """Moving leg whose speed is chosen so it lasts exactly ``duration_s``."""
    probe = Leg(mode, waypoints, 1.0, **kw)
    return replace(probe, speed_kmh=probe.length_m() / duration_s * 3.6)


def _station_coords(network: TransitNetwork, line: str, start: str, end: str) -> list[tuple[float, float]]:
    names = network.line_orders[line]
    i, j = names.index(start), names.index(end)
    chosen = names[i : j + 1] if i <= j else list(reversed(names[j : i + 1]))
    coords = []
    for name in chosen:
        record = network.station(line, name)
        coords.append((record.latitude, record.longitude))
    return coords


def _journey1() -> Scenario:
    home = (41.4480, 2.1930)
    car_end = (41.4050, 2.1345)
    stop_a = _offset(car_end, -170, 150)
    stop_b = (41.3888, 2.1130)
    stop_c = _offset(stop_b, 120, -130)
    stop_d = (41.3808, 2.1215)
    legs = [
        Leg("still", [home], duration_s=170),
        Leg("walk", [home, _offset(home, 0, 120)], 4.0),
        Leg("car", [_offset(home, 0, 120), (41.4420, 2.1700), (41.4200, 2.1450), car_end], 45.0, "no_wifi_road"),
        Leg("walk", [car_end, stop_a], 4.5),
    ]
    # bus departures land just after a window boundary, arrivals just before one
    scenario = Scenario(seed=1, legs=tuple(legs), start_ms=_epoch_ms(2014, 12, 16, 6, 30), name="journey1")
    legs += _wait_until_boundary(scenario, stop_a)
    legs.append(_timed("bus", [stop_a, (41.3990, 2.1250), stop_b], 8 * 120 - 25, line="V7"))
    legs.append(_timed("walk", [stop_b, stop_c], 100))
    scenario = replace(scenario, legs=tuple(legs))
    legs += _wait_until_boundary(scenario, stop_c)
    legs.append(_timed("bus", [stop_c, (41.3850, 2.1170), stop_d], 5 * 120 - 25, line="H8"))
    legs.append(Leg("walk", [stop_d, _offset(stop_d, -150, 0)], 4.5))
    legs.append(Leg("still", [_offset(stop_d, -150, 0)], duration_s=600))
    return replace(scenario, legs=tuple(legs), activity_noise=0.05)


def _wait_until_boundary(scenario: Scenario, where: tuple[float, float], window_s: int = 120) -> list[Leg]:
    elapsed = (scenario.end_ms - scenario.start_ms) / 1000.0
    wait = (math.ceil(elapsed / window_s) + 1) * window_s + 10 - elapsed
    return [Leg("still", [where], duration_s=wait)]


def _journey2(network: TransitNetwork) -> Scenario:
    canyelles = _station_coords(network, "L3", "Canyelles", "Canyelles")[0]
    lesseps = _station_coords(network, "L3", "Lesseps", "Lesseps")[0]
    home = _offset(canyelles, 250, 300)
    work = _offset(lesseps, -900, -1100)
    ride = _station_coords(network, "L3", "Canyelles", "Lesseps")
    legs = (
        Leg("still", [home], duration_s=240),
        Leg("walk", [home, _offset(canyelles, 250, 0), canyelles], 4.5),
        Leg("metro", ride, 28.0, "underground"),
        Leg("walk", [lesseps, _offset(lesseps, -900, 0), work], 4.5),
        Leg("still", [work], duration_s=1800),
        Leg("walk", [work, _offset(lesseps, -900, 0), lesseps], 4.5),
        Leg("metro", list(reversed(ride)), 28.0, "underground", stuck=True),
        Leg("walk", [canyelles, _offset(canyelles, 250, 0), home], 4.5),
        Leg("still", [home], duration_s=600),
    )
    return Scenario(
        seed=2, legs=legs, activity_noise=0.05, start_ms=_epoch_ms(2014, 12, 17, 8, 5), name="journey2"
    )


def _journey3() -> Scenario:
    home = (41.4010, 2.1560)
    stop_home = _offset(home, -160, 0)
    stop_upc = (41.3870, 2.1130)
    upc = _offset(stop_upc, 100, -150)
    via = (41.3950, 2.1330)
    out = [
        Leg("still", [home], duration_s=200),
        Leg("walk", [home, stop_home], 4.0),
    ]
    scenario = Scenario(seed=3, legs=tuple(out), start_ms=_epoch_ms(2014, 12, 18, 8, 0), name="journey3")
    out += _wait_until_boundary(scenario, stop_home)
    out.append(_timed("bus", [stop_home, via, stop_upc], 10 * 120 - 25, environment="no_wifi_road", line="60"))
    out.append(_timed("walk", [stop_upc, upc], 110))
    out.append(Leg("still", [upc], duration_s=3600))
    out.append(_timed("walk", [upc, stop_upc], 110))
    scenario = replace(scenario, legs=tuple(out))
    out += _wait_until_boundary(scenario, stop_upc)
    out.append(_timed("bus", [stop_upc, via, stop_home], 10 * 120 - 25, environment="no_wifi_road", line="60"))
    out.append(Leg("walk", [stop_home, home], 4.0))
    out.append(Leg("still", [home], duration_s=600))
    return replace(scenario, legs=tuple(out), activity_noise=0.05)


def _journey4() -> Scenario:
    start = (41.3870, 2.1700)
    legs = (
        Leg("walk", [start, (41.3917, 2.1649), (41.3955, 2.1610), (41.4025, 2.1527), (41.4066, 2.1497)], 4.5),
    )
    return Scenario(seed=4, legs=legs, activity_noise=0.05, start_ms=_epoch_ms(2014, 12, 19, 17, 0), name="journey4")


def _journey5() -> Scenario:
    home = (41.5450, 2.1090)
    city = (41.4120, 2.1780)
    legs = (
        Leg("still", [home], duration_s=120, environment="no_wifi_road"),
        Leg("car", [home, (41.5000, 2.1300), (41.4500, 2.1600), city], 60.0, "no_wifi_road"),
        Leg("walk", [city, _offset(city, 200, 0)], 4.5),
        Leg("still", [_offset(city, 200, 0)], duration_s=300),
    )
    return Scenario(
        seed=5,
        legs=legs,
        activity_noise=0.05,
        gps_warmup_s=40,
        start_ms=_epoch_ms(2014, 12, 20, 9, 15),
        name="journey5",
    )


PRESETS = ("journey1", "journey2", "journey3", "journey4", "journey5")


def preset(name: str, network: TransitNetwork | None = None) -> Scenario:
    """One of five reference journeys through Barcelona."""
    if name == "journey1":
        return _journey1()
    if name == "journey2":
        return _journey2(network or load_network())
    if name == "journey3":
        return _journey3()
    if name == "journey4":
        return _journey4()
    if name == "journey5":
        return _journey5()
    raise ValueError(f"unknown preset {name!r}; choose one of {', '.join(PRESETS)}")


def scheduled_trips(scenario: Scenario) -> list[ScheduleTrip]:
    """Timetable entries matching the scenario's bus and tram legs exactly."""
    trips = []
    for leg, (start, end) in zip(scenario.legs, scenario.leg_times()):
        if leg.mode not in ("bus", "tram"):
            continue
        trips.append(
            ScheduleTrip(
                vehicle_type=leg.mode,
                line=leg.line or "",
                origin_stop=leg.waypoints[0],
                destination_stop=leg.waypoints[-1],
                departure_epoch=start // 1000,
                arrival_epoch=end // 1000,
            )
        )
    return trips
