"""Estimator-style wrapper around the segmentation pipeline.

``fit`` only validates settings and loads the network and schedule; nothing
is learned. ``transform`` maps each trace to its segments and ``predict`` to
the per-segment labels.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import pipeline, transit
from .model import (
    LocationSample,
    PipelineConfig,
    Segment,
    TransitNetwork,
    load_network,
    load_schedule,
    validate_network,
)
from .pipeline import ActivityEvent, TraceEvent


def check_config(config: PipelineConfig | Mapping[str, Any] | str | Path | None) -> PipelineConfig:
    if config is None:
        return PipelineConfig()
    if isinstance(config, PipelineConfig):
        return config
    if isinstance(config, Mapping):
        return PipelineConfig.from_dict(config)
    if isinstance(config, (str, Path)):
        return PipelineConfig.from_json(config)
    raise TypeError(f"cannot build a configuration from {type(config).__name__}")


def check_trace(trace: Any) -> list[TraceEvent]:
    """Normalize one trace to a list of events in non-decreasing time order.

    Accepts a trace file path, or a sequence of events or their JSON-line
    dicts.
    """
    if isinstance(trace, (str, Path)):
        return pipeline.read_trace(trace)
    if isinstance(trace, Mapping) or not isinstance(trace, Iterable):
        raise TypeError("a trace must be a path or a sequence of events")
    events: list[TraceEvent] = []
    for item in trace:
        if isinstance(item, Mapping):
            item = pipeline.event_from_dict(dict(item))
        if not isinstance(item, (LocationSample, ActivityEvent)):
            raise TypeError(f"not a trace event: {item!r}")
        if events and item.timestamp < events[-1].timestamp:
            raise ValueError(f"trace is not time-ordered at t_ms={item.timestamp}")
        events.append(item)
    return events


def check_traces(X: Any) -> list[list[TraceEvent]]:
    if isinstance(X, (str, Path)) or isinstance(X, Mapping):
        raise TypeError("X must be a sequence of traces")
    return [check_trace(t) for t in X]


class TransportModeSegmenter(TransformerMixin, BaseEstimator):
    """Segments location and activity traces by mode of transport."""

    def __init__(
        self,
        config: PipelineConfig | Mapping[str, Any] | str | None = None,
        network: TransitNetwork | str | None = None,
        line_orders: str | None = None,
        schedule: Sequence[Any] | str | None = None,
        recognize_transit: bool = True,
    ):
        self.config = config
        self.network = network
        self.line_orders = line_orders
        self.schedule = schedule
        self.recognize_transit = recognize_transit

    def fit(self, X: Any = None, y: Any = None) -> "TransportModeSegmenter":
        self.config_ = check_config(self.config)
        if isinstance(self.network, TransitNetwork):
            self.network_ = self.network
        else:
            self.network_ = load_network(self.network, self.line_orders)
        problems = validate_network(self.network_)
        if problems:
            raise ValueError("invalid network: " + "; ".join(problems))
        if self.schedule is None or isinstance(self.schedule, (str, Path)):
            self.schedule_ = load_schedule(self.schedule)
        else:
            self.schedule_ = list(self.schedule)
        self.logs_: list[list[dict[str, Any]]] = []
        return self

    def _segment(self, events: list[TraceEvent]) -> tuple[list[Segment], list[dict[str, Any]]]:
        recognizer = (
            pipeline.make_recognizer(self.network_, self.config_) if self.recognize_transit else None
        )
        segments, log = pipeline.segment_trace(events, self.config_, recognizer=recognizer)
        if self.recognize_transit:
            segments = transit.post_process(segments, self.schedule_, self.network_, self.config_)
        return segments, log

    def transform(self, X: Any) -> list[list[Segment]]:
        check_is_fitted(self, "config_")
        out = []
        self.logs_ = []
        for events in check_traces(X):
            segments, log = self._segment(events)
            out.append(segments)
            self.logs_.append(log)
        return out

    def predict(self, X: Any) -> list[np.ndarray]:
        return [
            np.array([s.activity.value for s in segments], dtype=object)
            for segments in self.transform(X)
        ]
