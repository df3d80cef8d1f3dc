"""Per-window activity tallies and dominant-activity estimation."""

from __future__ import annotations

from .model import ActivityLabel, ActivityWindowCounts

# Highest priority first; decides between labels tied at the maximum count.
PRIORITY = (
    ActivityLabel.VEHICLE,
    ActivityLabel.BICYCLE,
    ActivityLabel.ON_FOOT,
    ActivityLabel.STILL,
    ActivityLabel.UNKNOWN,
)

# DetectedActivity type codes of the platform activity recognizer.
IN_VEHICLE = 0
ON_BICYCLE = 1
ON_FOOT = 2
STILL = 3
UNKNOWN = 4
TILTING = 5

_DETECTED_NAMES = {
    IN_VEHICLE: "vehicle",
    ON_BICYCLE: "bicycle",
    ON_FOOT: "on_foot",
    STILL: "still",
    UNKNOWN: "unknown",
    TILTING: "still",
}
_NAMED_CODES = {
    "IN_VEHICLE": IN_VEHICLE,
    "ON_BICYCLE": ON_BICYCLE,
    "ON_FOOT": ON_FOOT,
    "STILL": STILL,
    "UNKNOWN": UNKNOWN,
    "TILTING": TILTING,
}


def map_detected_type(raw_type: int | str) -> str:
    """Map a recognizer type code (or its constant name) to a raw activity label.

    Tilting is reported as still. Any other code raises ``ValueError``.
    """
    code = _NAMED_CODES.get(raw_type.upper(), raw_type) if isinstance(raw_type, str) else raw_type
    try:
        return _DETECTED_NAMES[code]
    except (KeyError, TypeError):
        raise ValueError(f"unrecognized detected-activity type: {raw_type!r}") from None


def ingest_label(counts: ActivityWindowCounts, label: str | ActivityLabel) -> ActivityWindowCounts:
    """Increment the counter for ``label`` in place and return ``counts``."""
    try:
        parsed = ActivityLabel(label)
    except ValueError:
        parsed = None
    if parsed is None or not parsed.is_raw:
        raise ValueError(f"not a raw activity label: {label!r}")
    if parsed is ActivityLabel.VEHICLE:
        counts.vehicle_count += 1
    elif parsed is ActivityLabel.BICYCLE:
        counts.bicycle_count += 1
    elif parsed is ActivityLabel.ON_FOOT:
        counts.on_foot_count += 1
    elif parsed is ActivityLabel.STILL:
        counts.still_count += 1
    else:
        counts.unknown_count += 1
    return counts


def estimate(counts: ActivityWindowCounts) -> ActivityLabel:
    """Dominant activity of a window.

    The label with the largest count wins; ties go to the higher-priority label
    (vehicle, bicycle, on_foot, still, unknown). A five-way tie, including the
    all-zero window, yields still.
    """
    best = max(counts.get(label) for label in PRIORITY)
    tied = [label for label in PRIORITY if counts.get(label) == best]
    if len(tied) == len(PRIORITY):
        return ActivityLabel.STILL
    return tied[0]
