"""Command-line batch workflow: simulate, process, stats, export-geojson, upload.

Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 I/O or network
error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from datetime import date, datetime
from pathlib import Path
from typing import Any, Sequence
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

from . import metrics, pipeline, simulate, store, transit
from .model import ActivityLabel, PipelineConfig, Segment, load_network, load_schedule

logger = logging.getLogger("mobiseg")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_IO = 3

ACTIVITY_COLORS = {
    "still": "#808080",
    "on_foot": "#2e8b57",
    "bicycle": "#ff8c00",
    "vehicle": "#000000",
    "unknown": "#c0c0c0",
    "metro": "#d62728",
    "bus": "#1f77b4",
    "tram": "#17becf",
    "train": "#9467bd",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _tz(name: str | None):
    if not name:
        return None
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError):
        raise UsageError(f"unknown time zone {name!r}") from None


def _config(args: argparse.Namespace) -> PipelineConfig:
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            values.update(json.load(fh))
    for item in getattr(args, "set", None) or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        values[key.strip()] = json.loads(raw)
    return PipelineConfig.from_dict(values)


def cmd_simulate(args: argparse.Namespace) -> int:
    if args.preset:
        scenario = simulate.preset(args.preset)
    elif args.scenario:
        scenario = simulate.Scenario.from_json(args.scenario)
    else:
        raise UsageError("give a scenario file or --preset")
    if args.seed is not None:
        scenario = replace(scenario, seed=args.seed)
    events = simulate.generate(scenario)
    pipeline.write_trace(events, args.out)
    logger.info("wrote %d events to %s", len(events), args.out)
    return EXIT_OK


def cmd_process(args: argparse.Namespace) -> int:
    config = _config(args)
    tz = _tz(args.tz)
    network = load_network(args.network, args.line_orders)
    schedule = load_schedule(args.schedule)
    events = pipeline.read_trace(args.trace)
    segments, log = pipeline.segment_trace(events, config, network)
    segments = transit.post_process(segments, schedule, network, config)
    store.write_segments(args.out, segments, tz=tz, compact=args.compact)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.jsonl")
    log_path.write_text("".join(json.dumps(entry) + "\n" for entry in log), encoding="utf-8")
    logger.info("%d segments written to %s", len(segments), args.out)
    return EXIT_OK


def _segments_day(path: str, explicit: str | None) -> date | None:
    if explicit:
        return datetime.strptime(explicit, "%Y-%m-%d").date()
    return store.date_from_filename(path)


def cmd_stats(args: argparse.Namespace) -> int:
    if args.weight <= 0:
        raise UsageError("--weight must be positive")
    config = _config(args)
    day = _segments_day(args.segments, args.date)
    segments = store.read_segments(args.segments, day)
    totals = metrics.daily_totals(segments, args.weight, config)
    label = store.day_filename(day)[:-5] if day else Path(args.segments).stem
    if args.stats_file and day:
        store.DailyStatsStore(args.stats_file).update(day, totals)
    sys.stdout.write(store.stats_csv([(label, totals.kcal, totals.co2_g)]))
    return EXIT_OK


def segment_feature(segment: Segment) -> dict[str, Any]:
    coords = [[p.longitude, p.latitude] for p in segment.location_points]
    if segment.activity is ActivityLabel.STILL or len(coords) == 1:
        geometry = {"type": "Point", "coordinates": coords[0]}
    else:
        geometry = {"type": "LineString", "coordinates": coords}
    props: dict[str, Any] = {
        "activity": segment.activity.value,
        "color": ACTIVITY_COLORS[segment.activity.value],
        "distance_m": segment.total_distance,
        "duration_s": segment.total_duration,
        "speed_kmh": segment.average_speed,
    }
    if segment.line is not None:
        props["line"] = segment.line
    return {"type": "Feature", "geometry": geometry, "properties": props}


def segments_geojson(segments: Sequence[Segment]) -> dict[str, Any]:
    features = [segment_feature(s) for s in segments if s.location_points]
    return {"type": "FeatureCollection", "features": features}


def cmd_export_geojson(args: argparse.Namespace) -> int:
    segments = store.read_segments(args.segments)
    doc = segments_geojson(segments)
    Path(args.out).write_text(json.dumps(doc, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_upload(args: argparse.Namespace) -> int:
    identity = store.load_or_create_identity(args.id_file)
    backend = store.backend_for(args.dest)
    where = store.upload(args.segments, identity, backend)
    print(where)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mobiseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="generate a synthetic trace")
    p.add_argument("scenario", nargs="?", help="scenario JSON file")
    p.add_argument("--preset", choices=simulate.PRESETS)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="trace output path (JSON lines)")
    p.set_defaults(func=cmd_simulate)

    def add_config(q: argparse.ArgumentParser) -> None:
        q.add_argument("--config", help="JSON file of pipeline settings")
        q.add_argument(
            "--set", action="append", metavar="KEY=VALUE", help="override one setting (repeatable)"
        )

    p = sub.add_parser("process", help="segment a trace and recognize transit")
    p.add_argument("trace")
    add_config(p)
    p.add_argument("--network", help="station database JSON (default: bundled)")
    p.add_argument("--line-orders", help="line order JSON (default: bundled)")
    p.add_argument("--schedule", help="bus/tram schedule JSON (default: bundled)")
    p.add_argument("--out", required=True)
    p.add_argument("--log", help="event log path (default: OUT.log.jsonl)")
    p.add_argument("--tz", help="IANA zone for HH:MM:SS times (default: local)")
    p.add_argument("--compact", action="store_true")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("stats", help="daily calories and CO2 saved as CSV")
    p.add_argument("segments")
    p.add_argument("--weight", type=float, required=True, help="body weight in kg")
    p.add_argument("--date", help="YYYY-MM-DD (default: from the file name)")
    p.add_argument("--stats-file", help="per-day JSON store to update")
    add_config(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("export-geojson", help="segments as a GeoJSON FeatureCollection")
    p.add_argument("segments")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_geojson)

    p = sub.add_parser("upload", help="upload a daily segment file anonymously")
    p.add_argument("segments")
    p.add_argument("--dest", required=True, help="directory or http(s) base URL")
    p.add_argument("--id-file", required=True, help="where the user id is kept")
    p.set_defaults(func=cmd_upload)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(message)s",
        )
        return args.func(args)
    except UsageError as exc:
        print(f"mobiseg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except store.UploadError as exc:
        print(f"mobiseg: upload failed: {exc}", file=sys.stderr)
        return EXIT_IO
    except (pipeline.TraceFormatError, store.SegmentFileError) as exc:
        print(f"mobiseg: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"mobiseg: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, KeyError) as exc:
        print(f"mobiseg: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
