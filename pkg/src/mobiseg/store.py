"""Segment files, daily naming, anonymous identity and uploads."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import re
import tempfile
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass
from datetime import date, datetime, timedelta, tzinfo
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Protocol, Sequence, TextIO

from .metrics import DailyTotals
from .model import ActivityLabel, LocationSample, Segment

SPEED_KEY = "speed (Km/h)"
_SPEED_KEY_ALIASES = (SPEED_KEY, "speed (Km\\h)")
_REQUIRED_KEYS = ("activity", "distance (m)", "duration (s)", "first time", "last time", "location")
HISTORY_SUFFIX = "location_segment.json"
_DATE_PREFIX = re.compile(r"^(\d{2})-(\d{2})-(\d{4})")
_HEX64 = re.compile(r"^[0-9a-f]{64}$")

_file_locks: dict[str, threading.Lock] = {}
_file_locks_guard = threading.Lock()


class SegmentFileError(ValueError):
    """A segment file could not be parsed."""


class UploadError(OSError):
    """Storing a file at the upload destination failed."""


# -- segment JSON -------------------------------------------------------------


def format_time(timestamp_ms: int, tz: tzinfo | None = None) -> str:
    """``HH:MM:SS`` wall-clock time; ``tz=None`` uses the local zone."""
    return datetime.fromtimestamp(timestamp_ms // 1000, tz).strftime("%H:%M:%S")


def segment_to_dict(segment: Segment, tz: tzinfo | None = None) -> dict[str, Any]:
    obj: dict[str, Any] = {
        "activity": segment.activity.value,
        "distance (m)": float(segment.total_distance),
        "duration (s)": int(segment.total_duration),
    }
    if segment.line is not None:
        obj["line"] = segment.line
    obj[SPEED_KEY] = float(segment.average_speed)
    obj["first time"] = format_time(segment.first_location.timestamp, tz)
    obj["last time"] = format_time(segment.last_location.timestamp, tz)
    location: list[Any] = []
    for point in segment.location_points:
        location.extend((point.latitude, point.longitude, format_time(point.timestamp, tz)))
    obj["location"] = location
    return obj


def dumps_segments(
    segments: Sequence[Segment], tz: tzinfo | None = None, compact: bool = False
) -> str:
    doc = {"segments": [segment_to_dict(s, tz) for s in segments]}
    if compact:
        return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))
    return json.dumps(doc, ensure_ascii=False, indent=1)


def _lock_for(path: Path) -> threading.Lock:
    key = str(path.resolve())
    with _file_locks_guard:
        return _file_locks.setdefault(key, threading.Lock())


def write_segments(
    path: str | Path,
    segments: Sequence[Segment],
    tz: tzinfo | None = None,
    compact: bool = False,
) -> Path:
    """Rewrite ``path`` with the full segment list (never appends)."""
    path = Path(path)
    text = dumps_segments(segments, tz, compact)
    path.parent.mkdir(parents=True, exist_ok=True)
    with _lock_for(path):
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    return path


def date_from_filename(path: str | Path) -> date | None:
    match = _DATE_PREFIX.match(Path(path).name)
    if not match:
        return None
    day, month, year = map(int, match.groups())
    try:
        return date(year, month, day)
    except ValueError:
        return None


class _Clock:
    """Turns successive HH:MM:SS strings into epoch ms, rolling over midnight."""

    def __init__(self, day: date, tz: tzinfo | None):
        self.day = day
        self.tz = tz

    def to_ms(self, text: str, not_before: int | None = None) -> int:
        try:
            t = datetime.strptime(text, "%H:%M:%S").time()
        except (TypeError, ValueError):
            raise SegmentFileError(f"bad time value {text!r}, expected HH:MM:SS") from None
        ms = self._epoch_ms(self.day, t)
        if not_before is not None and ms < not_before:
            ms = self._epoch_ms(self.day + timedelta(days=1), t)
        return ms

    def _epoch_ms(self, day: date, t) -> int:
        stamp = datetime.combine(day, t, tzinfo=self.tz)
        return int(stamp.timestamp()) * 1000


def segment_from_dict(obj: Mapping[str, Any], day: date, tz: tzinfo | None = None) -> Segment:
    if not isinstance(obj, Mapping):
        raise SegmentFileError("segment entries must be JSON objects")
    for key in _REQUIRED_KEYS:
        if key not in obj:
            raise SegmentFileError(f"segment is missing required key {key!r}")
    speed_key = next((k for k in _SPEED_KEY_ALIASES if k in obj), None)
    if speed_key is None:
        raise SegmentFileError(f"segment is missing required key {SPEED_KEY!r}")
    try:
        activity = ActivityLabel.parse(obj["activity"])
    except ValueError as exc:
        raise SegmentFileError(str(exc)) from None
    location = obj["location"]
    if not isinstance(location, list) or len(location) % 3 != 0:
        raise SegmentFileError("location array length must be a multiple of 3")

    clock = _Clock(day, tz)
    first_ms = clock.to_ms(obj["first time"])
    points = []
    previous = first_ms
    for j in range(0, len(location), 3):
        lat, lon, stamp = location[j : j + 3]
        t = clock.to_ms(stamp, not_before=previous)
        points.append(LocationSample(float(lat), float(lon), None, t))
        previous = t
    last_ms = clock.to_ms(obj["last time"], not_before=first_ms)
    first = _endpoint(points[0] if points else None, first_ms)
    last = _endpoint(points[-1] if points else None, last_ms)
    line = obj.get("line") if activity.is_transit else None
    try:
        return Segment(
            activity=activity,
            first_location=first,
            last_location=last,
            total_distance=float(obj["distance (m)"]),
            total_duration=int(obj["duration (s)"]),
            average_speed=float(obj[speed_key]),
            location_points=tuple(points),
            line=None if line is None else str(line),
        )
    except (TypeError, ValueError) as exc:
        raise SegmentFileError(f"invalid segment: {exc}") from None


def _endpoint(point: LocationSample | None, t_ms: int) -> LocationSample:
    # files store no coordinates for first/last, only times
    if point is None:
        return LocationSample(0.0, 0.0, None, t_ms)
    return LocationSample(point.latitude, point.longitude, None, t_ms)


def loads_segments(text: str, day: date | None = None, tz: tzinfo | None = None) -> list[Segment]:
    # the backslash spelling "(Km\h)" is not valid JSON; normalize it first
    text = text.replace("(Km\\h)", "(Km/h)")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SegmentFileError(f"malformed JSON: {exc}") from None
    if not isinstance(doc, dict) or "segments" not in doc:
        raise SegmentFileError("missing required key 'segments'")
    if not isinstance(doc["segments"], list):
        raise SegmentFileError("'segments' must be an array")
    day = day or date(1970, 1, 1)
    return [segment_from_dict(obj, day, tz) for obj in doc["segments"]]


def read_segments(
    path: str | Path, day: date | None = None, tz: tzinfo | None = None
) -> list[Segment]:
    """Parse a segment file.

    Times in the file carry no date; it is taken from ``day``, else from a
    ``DD-MM-YYYY`` filename prefix, else 1970-01-01.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return loads_segments(text, day or date_from_filename(path), tz)


# -- naming -----------------------------------------------------------------


@dataclass(frozen=True)
class UserIdentity:
    id_hex: str

    def __post_init__(self) -> None:
        if not _HEX64.match(self.id_hex):
            raise ValueError("user id must be 64 lowercase hex characters")

    def __str__(self) -> str:
        return self.id_hex


def day_filename(day: date) -> str:
    return f"{day.day:02d}-{day.month:02d}-{day.year:04d}.json"


def history_filename(day: date) -> str:
    return f"{day.day:02d}-{day.month:02d}-{day.year:04d}{HISTORY_SUFFIX}"


def daily_path(base_dir: str | Path, identity: UserIdentity, day: date) -> Path:
    return Path(base_dir) / identity.id_hex / day_filename(day)


# -- identity ---------------------------------------------------------------


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def generate_identity(
    entropy: Callable[[int], bytes] = os.urandom,
    clock: Callable[[], float] = time.time,
    process_id: Callable[[], int] = os.getpid,
) -> UserIdentity:
    """Hash of current millis, a uniform draw, the pid and a fresh 256-bit key."""
    millis = int(clock() * 1000)
    uniform = (int.from_bytes(entropy(8), "big") >> 11) / float(1 << 53)
    key = entropy(32)
    seed = f"{millis}{uniform!r}{process_id()}{key.hex()}"
    return UserIdentity(sha256_hex(seed))


def load_or_create_identity(path: str | Path) -> UserIdentity:
    path = Path(path)
    if path.exists():
        return UserIdentity(path.read_text(encoding="utf-8").strip())
    identity = generate_identity()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(identity.id_hex + "\n", encoding="utf-8")
    return identity


# -- upload -----------------------------------------------------------------


class UploadBackend(Protocol):
    def put(self, relative_path: str, data: bytes) -> str: ...


class LocalDirectoryBackend:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    def put(self, relative_path: str, data: bytes) -> str:
        target = self.root / relative_path
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        except OSError as exc:
            raise UploadError(f"cannot store {target}: {exc}") from exc
        return str(target)


class HttpPutBackend:
    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def put(self, relative_path: str, data: bytes) -> str:
        url = f"{self.base_url}/{relative_path}"
        request = urllib.request.Request(
            url, data=data, method="PUT", headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                status = response.status
        except (urllib.error.URLError, OSError) as exc:
            raise UploadError(f"PUT {url} failed: {exc}") from exc
        if not 200 <= status < 300:
            raise UploadError(f"PUT {url} returned HTTP {status}")
        return url


def backend_for(destination: str) -> UploadBackend:
    if destination.startswith(("http://", "https://")):
        return HttpPutBackend(destination)
    return LocalDirectoryBackend(destination)


def upload(
    local_file: str | Path,
    identity: UserIdentity,
    destination: UploadBackend,
    day: date | None = None,
) -> str:
    """Validate a segment file and store it as ``<id>/<DD-MM-YYYY>.json``.

    Returns where the file was stored. Raises :class:`SegmentFileError` for an
    invalid file (nothing is transferred) and :class:`UploadError` when the
    backend fails; retrying is up to the caller.
    """
    local_file = Path(local_file)
    data = local_file.read_bytes()
    loads_segments(data.decode("utf-8"))
    day = day or date_from_filename(local_file)
    name = day_filename(day) if day is not None else local_file.name
    return destination.put(f"{identity.id_hex}/{name}", data)


# -- per-day statistics -------------------------------------------------------


class DailyStatsStore:
    """Per-day calories and CO2 maps persisted as JSON, exportable as CSV."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def load(self) -> dict[str, dict[str, float]]:
        if not self.path.exists():
            return {"calories": {}, "co2": {}}
        data = json.loads(self.path.read_text(encoding="utf-8"))
        return {"calories": dict(data.get("calories", {})), "co2": dict(data.get("co2", {}))}

    def update(self, day: date, totals: DailyTotals) -> None:
        data = self.load()
        key = day_filename(day)[: -len(".json")]
        data["calories"][key] = totals.kcal
        data["co2"][key] = totals.co2_g
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with _lock_for(self.path):
            self.path.write_text(json.dumps(data, indent=1, sort_keys=True), encoding="utf-8")

    def rows(self) -> list[tuple[str, float, float]]:
        data = self.load()
        days = sorted(
            set(data["calories"]) | set(data["co2"]),
            key=lambda k: (k[6:10], k[3:5], k[0:2]),
        )
        return [(d, data["calories"].get(d, 0.0), data["co2"].get(d, 0.0)) for d in days]


def write_stats_csv(rows: Iterable[tuple[str, float, float]], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["date", "kcal", "co2_g"])
    for day, kcal, co2 in rows:
        writer.writerow([day, repr(float(kcal)), repr(float(co2))])


def stats_csv(rows: Iterable[tuple[str, float, float]]) -> str:
    buffer = io.StringIO()
    write_stats_csv(rows, buffer)
    return buffer.getvalue()
