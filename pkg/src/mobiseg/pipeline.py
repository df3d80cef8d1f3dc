"""Location-processing state machine.

Samples arrive every few seconds; every ``window_seconds`` of trace time the
buffered fixes and activity tallies are reduced to one window, which either
opens a new segment or is merged into the current one. Along the way the
machine decides when GPS should be switched on and detects underground
blackouts that may hide a metro ride.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Sequence, Union

from . import activity
from .geo import average_speed_kmh, block_distance_m, path_distance_m
from .model import (
    ActivityLabel,
    ActivityWindowCounts,
    LocationSample,
    PipelineConfig,
    Segment,
    TransitNetwork,
)
from .transit import MetroRoute, metro_segment, recognize_metro

MetroRecognizer = Callable[[LocationSample, LocationSample], "tuple[MetroRoute, str] | None"]


class GpsSignal(enum.Enum):
    ENABLE = "enable"
    DISABLE = "disable"
    NO_CHANGE = "no_change"


@dataclass(frozen=True)
class ActivityEvent:
    label: str
    timestamp: int  # epoch milliseconds


TraceEvent = Union[LocationSample, ActivityEvent]


class TraceFormatError(ValueError):
    def __init__(self, source: str, line_no: int, message: str):
        super().__init__(f"{source}:{line_no}: {message}")
        self.source = source
        self.line_no = line_no


@dataclass(frozen=True)
class WindowStats:
    duration_s: int
    block_distance_m: float
    distance_m: float
    speed_kmh: float

    @classmethod
    def from_samples(cls, samples: Sequence[LocationSample], config: PipelineConfig) -> "WindowStats":
        duration = (samples[-1].timestamp - samples[0].timestamp) // 1000
        distance = path_distance_m(samples, config.earth_radius_m)
        speed = average_speed_kmh(distance, duration) if duration > 0 else 0.0
        return cls(duration, block_distance_m(samples, config.earth_radius_m), distance, speed)


@dataclass
class PipelineState:
    window_buffer: list[LocationSample] = field(default_factory=list)
    counts: ActivityWindowCounts = field(default_factory=ActivityWindowCounts)
    reploc: int = 0
    badloc: int = 0
    gps_on: bool = False
    gps_windows_remaining: int = 0
    afterbad: bool = False
    loc1: LocationSample | None = None
    locgood: list[LocationSample] = field(default_factory=list)
    last_good: LocationSample | None = None
    last_activity: ActivityLabel | None = None
    segments: list[Segment] = field(default_factory=list)
    temp_duration: int = 0
    temp_distance: float = 0.0
    temp_speed: float = 0.0
    last_timestamp: int | None = None
    log: list[dict[str, Any]] = field(default_factory=list)

    def _record(self, t_ms: int, event: str, **extra: Any) -> None:
        self.log.append({"t_ms": t_ms, "event": event, **extra})

    def _enable_gps(self, t_ms: int, config: PipelineConfig) -> GpsSignal:
        self.gps_on = True
        self.gps_windows_remaining = config.gps_max_windows
        self._record(t_ms, "gps_enable")
        return GpsSignal.ENABLE


def on_activity(state: PipelineState, event: ActivityEvent) -> PipelineState:
    _check_order(state, event.timestamp)
    activity.ingest_label(state.counts, event.label)
    return state


def on_location(
    state: PipelineState, sample: LocationSample, config: PipelineConfig
) -> tuple[PipelineState, GpsSignal]:
    _check_order(state, sample.timestamp)
    accuracy = sample.accuracy
    if accuracy is None:
        raise ValueError("pipeline input samples must carry an accuracy")
    signal = GpsSignal.NO_CHANGE

    if accuracy < config.good_accuracy_m:
        state.last_good = sample
        if state.afterbad:
            if not (state.locgood and state.locgood[-1].same_position(sample)):
                state.locgood.append(sample)
            return state, signal
        previous = state.window_buffer[-1] if state.window_buffer else None
        state.window_buffer.append(sample)
        if not state.gps_on and previous is not None:
            if sample.same_position(previous):
                state.reploc += 1
                counts = state.counts
                if state.reploc > config.reploc_trigger and (
                    counts.vehicle_count > 1 or counts.on_foot_count > 2
                ):
                    signal = state._enable_gps(sample.timestamp, config)
            else:
                state.reploc = 0
    elif accuracy < config.bad_accuracy_m:
        if sample.wifi_enabled and not state.gps_on:
            signal = state._enable_gps(sample.timestamp, config)
    elif accuracy > config.bad_accuracy_m and sample.wifi_enabled:
        state.badloc += 1
    return state, signal


def on_window_close(
    state: PipelineState,
    config: PipelineConfig,
    recognizer: MetroRecognizer | None = None,
    now_ms: int | None = None,
) -> tuple[PipelineState, GpsSignal]:
    """Reduce the current window. ``recognizer`` resolves underground rides."""
    t_ms = now_ms if now_ms is not None else (state.last_timestamp or 0)
    signal = GpsSignal.NO_CHANGE

    if state.gps_on:
        state.gps_windows_remaining -= 1
        if state.gps_windows_remaining <= 0:
            state.gps_on = False
            state.gps_windows_remaining = 0
            state._record(t_ms, "gps_disable")
            signal = GpsSignal.DISABLE

    if state.badloc > config.badloc_trigger and state.last_good is not None and not state.afterbad:
        state.afterbad = True
        state.loc1 = state.last_good
        state.locgood = []
        state._record(t_ms, "underground_enter", loc1_t_ms=state.loc1.timestamp)
        _reset_window(state)
        return state, signal

    if state.afterbad:
        if len(state.locgood) <= 2:
            _reset_window(state)
            return state, signal
        loc1, loc2 = state.loc1, state.locgood[0]
        result = recognizer(loc1, loc2) if recognizer is not None else None
        if result is None:
            state._record(t_ms, "metro_false_positive")
        else:
            route, _line = result
            segment = metro_segment(route, loc1, loc2)
            state.segments.append(segment)
            state.last_activity = ActivityLabel.METRO
            state.temp_duration = segment.total_duration
            state.temp_distance = segment.total_distance
            state.temp_speed = segment.average_speed
            state._record(t_ms, "metro_recognized", line=segment.line, stations=route.station_names)
        state._record(t_ms, "underground_exit", loc2_t_ms=loc2.timestamp)
        state.badloc = 0
        state.afterbad = False
        state.loc1 = None
        state.window_buffer = list(state.locgood)
        state.locgood = []

    if state.window_buffer:
        stats = WindowStats.from_samples(state.window_buffer, config)
        estimated = activity.estimate(state.counts)
        apply_window(state, estimated, stats, config)
    _reset_window(state)
    return state, signal


def _reset_window(state: PipelineState) -> None:
    state.window_buffer = []
    state.counts = ActivityWindowCounts()


def _check_order(state: PipelineState, timestamp: int) -> None:
    if state.last_timestamp is not None and timestamp < state.last_timestamp:
        raise ValueError(
            f"out-of-order timestamp {timestamp} after {state.last_timestamp}"
        )
    state.last_timestamp = timestamp


def _most_accurate(samples: Iterable[LocationSample]) -> LocationSample:
    best = None
    for s in samples:
        if best is None or (s.accuracy or float("inf")) < (best.accuracy or float("inf")):
            best = s
    return best


def apply_window(
    state: PipelineState,
    estimated: ActivityLabel,
    stats: WindowStats,
    config: PipelineConfig,
) -> PipelineState:
    """Open or extend a segment with the current window.

    ``estimated`` is the window's dominant raw activity. Walking that stays
    within the block radius counts as still; a vehicle window right after
    walking must exceed the walking speed limit, otherwise it extends the walk.
    """
    samples = state.window_buffer
    previous = state.last_activity
    if estimated is ActivityLabel.STILL or (
        estimated is ActivityLabel.ON_FOOT and stats.block_distance_m <= config.block_radius_m
    ):
        _still_window(state, stats, samples)
    elif (
        estimated is ActivityLabel.VEHICLE
        and previous is ActivityLabel.ON_FOOT
        and stats.speed_kmh <= config.max_on_foot_speed_kmh
    ):
        _merge(state, ActivityLabel.ON_FOOT, stats, samples)
    elif estimated is previous:
        _merge(state, estimated, stats, samples)
    else:
        _open(state, estimated, stats, samples)
    return state


def _open(state: PipelineState, label: ActivityLabel, stats: WindowStats, samples) -> None:
    state.segments.append(
        Segment(
            activity=label,
            first_location=samples[0],
            last_location=samples[-1],
            total_distance=stats.distance_m,
            total_duration=stats.duration_s,
            average_speed=stats.speed_kmh,
            location_points=tuple(samples),
        )
    )
    state.last_activity = label
    state.temp_duration = stats.duration_s
    state.temp_distance = stats.distance_m
    state.temp_speed = stats.speed_kmh


def _merge(state: PipelineState, label: ActivityLabel, stats: WindowStats, samples) -> None:
    current = state.segments[-1]
    state.temp_duration += stats.duration_s
    state.temp_distance += stats.distance_m
    state.temp_speed = (state.temp_speed + stats.speed_kmh) / 2
    state.segments[-1] = replace(
        current,
        activity=label,
        last_location=samples[-1],
        total_distance=state.temp_distance,
        total_duration=state.temp_duration,
        average_speed=state.temp_speed,
        location_points=current.location_points + tuple(samples),
    )
    state.last_activity = label


def _still_window(state: PipelineState, stats: WindowStats, samples) -> None:
    best = _most_accurate(samples)
    if state.last_activity is ActivityLabel.STILL:
        current = state.segments[-1]
        kept = _most_accurate([current.location_points[0], best])
        state.temp_duration += stats.duration_s
        state.segments[-1] = replace(
            current,
            last_location=samples[-1],
            total_duration=state.temp_duration,
            location_points=(kept,),
        )
    else:
        state.segments.append(
            Segment(
                activity=ActivityLabel.STILL,
                first_location=samples[0],
                last_location=samples[-1],
                total_distance=0.0,
                total_duration=stats.duration_s,
                average_speed=0.0,
                location_points=(best,),
            )
        )
        state.temp_duration = stats.duration_s
    state.temp_distance = 0.0
    state.temp_speed = 0.0
    state.last_activity = ActivityLabel.STILL


def flush_underground(state: PipelineState, config: PipelineConfig) -> PipelineState:
    """Close an unfinished underground episode at end of trace as plain vehicle."""
    if not state.afterbad or state.loc1 is None or not state.locgood:
        return state
    points = [state.loc1] + state.locgood
    stats = WindowStats.from_samples(points, config)
    state.window_buffer = points
    if state.last_activity is ActivityLabel.VEHICLE:
        _merge(state, ActivityLabel.VEHICLE, stats, points)
    else:
        _open(state, ActivityLabel.VEHICLE, stats, points)
    state._record(points[-1].timestamp, "underground_unresolved")
    state.afterbad = False
    state.loc1 = None
    state.locgood = []
    _reset_window(state)
    return state


def make_recognizer(network: TransitNetwork, config: PipelineConfig) -> MetroRecognizer:
    def recognize(loc1: LocationSample, loc2: LocationSample):
        return recognize_metro(loc1, loc2, network, config)

    return recognize


class TraceProcessor:
    """Drive the state machine over a time-ordered event stream.

    Windows are anchored at the first event and close whenever an event at or
    past the next boundary arrives, so idle stretches close several windows in
    a row.
    """

    def __init__(
        self,
        config: PipelineConfig | None = None,
        recognizer: MetroRecognizer | None = None,
    ):
        self.config = config or PipelineConfig()
        self.recognizer = recognizer
        self.state = PipelineState()
        self._next_close: int | None = None

    @property
    def window_ms(self) -> int:
        return int(self.config.window_seconds * 1000)

    def advance(self, t_ms: int) -> list[GpsSignal]:
        """Close every window whose boundary is at or before ``t_ms``."""
        signals = []
        if self._next_close is None:
            self._next_close = t_ms + self.window_ms
            return signals
        while t_ms >= self._next_close:
            _, signal = on_window_close(self.state, self.config, self.recognizer, self._next_close)
            if signal is not GpsSignal.NO_CHANGE:
                signals.append(signal)
            self._next_close += self.window_ms
        return signals

    def feed(self, event: TraceEvent) -> list[GpsSignal]:
        if self.state.last_timestamp is not None and event.timestamp < self.state.last_timestamp:
            raise ValueError(
                f"out-of-order timestamp {event.timestamp} after {self.state.last_timestamp}"
            )
        signals = self.advance(event.timestamp)
        if isinstance(event, ActivityEvent):
            on_activity(self.state, event)
        else:
            _, signal = on_location(self.state, event, self.config)
            if signal is not GpsSignal.NO_CHANGE:
                signals.append(signal)
        return signals

    def finish(self) -> list[Segment]:
        if self._next_close is not None:
            on_window_close(self.state, self.config, self.recognizer, self._next_close)
            self._next_close = None
        flush_underground(self.state, self.config)
        return list(self.state.segments)


def segment_trace(
    events: Iterable[TraceEvent],
    config: PipelineConfig | None = None,
    network: TransitNetwork | None = None,
    recognizer: MetroRecognizer | None = None,
) -> tuple[list[Segment], list[dict[str, Any]]]:
    """Run a whole trace; returns the segments and the event log."""
    config = config or PipelineConfig()
    if recognizer is None and network is not None:
        recognizer = make_recognizer(network, config)
    processor = TraceProcessor(config, recognizer)
    for event in events:
        processor.feed(event)
    segments = processor.finish()
    return segments, processor.state.log


# -- trace files (JSON lines) ------------------------------------------------


def event_to_dict(event: TraceEvent) -> dict[str, Any]:
    if isinstance(event, ActivityEvent):
        return {"type": "act", "label": event.label, "t_ms": event.timestamp}
    return {
        "type": "loc",
        "lat": event.latitude,
        "lon": event.longitude,
        "accuracy_m": event.accuracy,
        "t_ms": event.timestamp,
        "wifi": event.wifi_enabled,
    }


def event_from_dict(obj: dict[str, Any]) -> TraceEvent:
    kind = obj.get("type")
    if kind == "loc":
        return LocationSample(
            latitude=float(obj["lat"]),
            longitude=float(obj["lon"]),
            accuracy=float(obj["accuracy_m"]),
            timestamp=int(obj["t_ms"]),
            wifi_enabled=bool(obj.get("wifi", False)),
        )
    if kind == "act":
        return ActivityEvent(label=str(obj["label"]), timestamp=int(obj["t_ms"]))
    raise ValueError(f"unknown event type {kind!r}")


def iter_trace(lines: Iterable[str], source: str = "<trace>") -> Iterator[TraceEvent]:
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            yield event_from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise TraceFormatError(source, line_no, str(exc)) from exc


def read_trace(path: str | Path) -> list[TraceEvent]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_trace(fh, str(path)))


def dumps_trace(events: Iterable[TraceEvent]) -> str:
    return "".join(json.dumps(event_to_dict(e)) + "\n" for e in events)


def write_trace(events: Iterable[TraceEvent], path: str | Path) -> None:
    Path(path).write_text(dumps_trace(events), encoding="utf-8")
