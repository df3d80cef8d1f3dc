"""Acceptance checks, one per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary. Run with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import json
import random
import time
from dataclasses import replace
from datetime import date

import pytest

from conftest import CET, on_foot_samples, sample
from mobiseg.activity import estimate
from mobiseg.geo import distance_m
from mobiseg.metrics import calories_kcal, co2_saved_g, daily_totals
from mobiseg.model import ActivityLabel, ActivityWindowCounts, PipelineConfig, ScheduleTrip, Segment
from mobiseg.pipeline import (
    ActivityEvent,
    GpsSignal,
    PipelineState,
    TraceProcessor,
    WindowStats,
    make_recognizer,
    on_activity,
    on_location,
    on_window_close,
    segment_trace,
)
from mobiseg.simulate import generate, preset, scheduled_trips
from mobiseg.store import UserIdentity, daily_path, dumps_segments, generate_identity, loads_segments
from mobiseg.transit import find_metro_route, find_trip, post_process, recognize_metro

RESULTS: dict[int, str] = {}
CFG = PipelineConfig()


class criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        took = time.perf_counter() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        line = f"criterion {self.number}: {status}  {self.title} ({took:.2f} s)"
        if exc is not None:
            line += f"  [{exc_type.__name__}: {exc}]".replace("\n", " ")[:300]
        RESULTS[self.number] = line
        print(line)
        return False


def test_1_golden_on_foot_segment():
    with criterion(1, "on_foot trail distance, duration, speed, file layout"):
        start = time.perf_counter()
        pts = on_foot_samples()
        stats = WindowStats.from_samples(pts, CFG)
        assert stats.distance_m == pytest.approx(49.69776445992602, rel=1e-6)
        assert stats.duration_s == 142
        assert stats.speed_kmh == pytest.approx(1.2599432, rel=1e-6)
        seg = Segment(ActivityLabel.ON_FOOT, pts[0], pts[-1], stats.distance_m, stats.duration_s, stats.speed_kmh, tuple(pts))
        obj = json.loads(dumps_segments([seg], tz=CET))["segments"][0]
        assert list(obj) == ["activity", "distance (m)", "duration (s)", "speed (Km/h)", "first time", "last time", "location"]
        assert (obj["first time"], obj["last time"]) == ("09:46:44", "09:49:07")
        expected = [41.441145, 2.1659081, "09:46:44", 41.4410568, 2.1660705, "09:47:11", 41.441012, 2.1661082, "09:47:32",
                    41.4409738, 2.1661926, "09:48:13", 41.440959, 2.1662142, "09:48:34", 41.4410113, 2.1663986, "09:49:07"]
        assert obj["location"] == expected
        assert time.perf_counter() - start < 1.0


def test_2_golden_metro_route(network):
    with criterion(2, "L3 route Canyelles to Montbau and transfer via Vall d'Hebron"):
        start = time.perf_counter()
        c, m = network.station("L3", "Canyelles"), network.station("L3", "Montbau")
        route, line = recognize_metro(sample(c.latitude, c.longitude, 0), sample(m.latitude, m.longitude, 410_000), network, CFG)
        assert route.station_names == ["Canyelles", "Valldaura", "Mundet", "Montbau"]
        assert line == "L3"
        assert route.distance_m == pytest.approx(2270.152587890625, rel=1e-6)
        transfer = find_metro_route(network, "Canyelles", "Camp de l'Arpa")
        assert [l for l, _ in transfer.line_sequence] == ["L3", "L5"]
        assert transfer.line_sequence[0][1][-1] == "Vall d'Hebron"
        assert time.perf_counter() - start < 1.0


def _reference_estimate(f, b, s, v, u):
    idx = [i for i, x in enumerate((f, b, s, v, u)) if x == max(f, b, s, v, u)]
    names = ["on_foot", "bicycle", "still", "vehicle", "unknown"]
    if len(idx) == 1:
        return names[idx[0]]
    if len(idx) == 5:
        return "still"
    for code in (3, 1, 0):  # vehicle, bicycle, on_foot
        if code in idx:
            return names[code]
    return "still"


def test_3_activity_estimation():
    with criterion(3, "worked examples and 3125-case exhaustive oracle"):
        start = time.perf_counter()
        assert estimate(ActivityWindowCounts(1, 0, 5, 2, 1)) is ActivityLabel.ON_FOOT
        assert estimate(ActivityWindowCounts(5, 0, 5, 5, 1)) is ActivityLabel.VEHICLE
        n = 0
        for v, b, f, s, u in itertools.product(range(5), repeat=5):
            assert estimate(ActivityWindowCounts(v, b, f, s, u)).value == _reference_estimate(f, b, s, v, u)
            n += 1
        assert n == 3125
        assert time.perf_counter() - start < 5.0


def test_4_gps_activator():
    with criterion(4, "GPS enable on repeated fix and medium accuracy, disable after 2 windows"):
        state = PipelineState()
        for _ in range(3):
            on_activity(state, ActivityEvent("on_foot", 0))
        signals = [on_location(state, sample(41.4, 2.1, 1000 * i, 50.0), CFG)[1] for i in range(1, 5)]
        assert signals == [GpsSignal.NO_CHANGE] * 3 + [GpsSignal.ENABLE]
        closes = [on_window_close(state, CFG, now_ms=120_000 * k)[1] for k in (1, 2)]
        assert closes == [GpsSignal.NO_CHANGE, GpsSignal.DISABLE]

        state = PipelineState()
        signals = [on_location(state, sample(41.4, 2.1, 1000 * i, acc), CFG)[1] for i, acc in enumerate([150.0, 120.0, 450.0, 700.0], 1)]
        assert signals == [GpsSignal.NO_CHANGE, GpsSignal.NO_CHANGE, GpsSignal.ENABLE, GpsSignal.NO_CHANGE]
        closes = [on_window_close(state, CFG, now_ms=120_000 * k)[1] for k in (1, 2, 3)]
        assert closes == [GpsSignal.NO_CHANGE, GpsSignal.DISABLE, GpsSignal.NO_CHANGE]
        assert [e["event"] for e in state.log] == ["gps_enable", "gps_disable"]


def _blackout_trace(recovered):
    canyelles = (41.4417702469479, 2.16633743592508)
    trace = [sample(*canyelles, 0, 30.0)]
    trace += [sample(*canyelles, 20_000 * k, 1800.0) for k in range(1, 6)]
    trace += [sample(lat, lon, 140_000 + 20_000 * k, 20.0) for k, (lat, lon) in enumerate(recovered)]
    return trace


def test_5_underground_state_machine(network):
    with criterion(5, "underground enter/exit, single recognition call, false positive"):
        montbau = network.station("L3", "Montbau")
        calls = []
        inner = make_recognizer(network, CFG)

        def spy(a, b):
            calls.append((a, b))
            return inner(a, b)

        recovered = [(montbau.latitude + 1e-5 * k, montbau.longitude) for k in range(3)]
        trace = _blackout_trace(recovered)
        proc = TraceProcessor(CFG, spy)
        for e in trace:
            proc.feed(e)
        segments = proc.finish()
        events = [e["event"] for e in proc.state.log]
        assert events.index("underground_enter") < events.index("underground_exit")
        assert len(calls) == 1
        assert calls[0][0] == trace[0] and calls[0][1] == trace[6]
        assert [s.line for s in segments if s.activity is ActivityLabel.METRO] == ["L3"]

        canyelles = (trace[0].latitude, trace[0].longitude)
        fp = _blackout_trace([(canyelles[0] + 1e-5 * k, canyelles[1]) for k in range(1, 4)])
        segments, log = segment_trace(fp, CFG, network)
        assert not any(s.activity is ActivityLabel.METRO for s in segments)
        assert "metro_false_positive" in [e["event"] for e in log]


def _scan(trips, o, d, dep, arr):
    for t in trips:
        if (distance_m(*o, *t.origin_stop) <= 200 and distance_m(*d, *t.destination_stop) <= 200
                and abs(t.departure_epoch - dep) < 300 and abs(t.arrival_epoch - arr) < 180):
            return t
    return None


def test_6_bus_tram_margins():
    with criterion(6, "schedule matching margins and linear-scan oracle"):
        o, d = (41.40, 2.15), (41.42, 2.17)
        trip = ScheduleTrip("bus", "V7", o, d, 10_000, 11_000)
        m = lambda dep, arr: find_trip(sample(*o, 0), sample(*d, 0), dep, arr, [trip], CFG)
        assert m(10_299, 11_000) == trip and m(10_301, 11_000) is None
        assert m(10_000, 11_179) == trip and m(10_000, 11_181) is None
        rng = random.Random(11)
        for _ in range(2000):
            trips = []
            for _ in range(rng.randint(0, 6)):
                dep = rng.randint(9_500, 10_500)
                trips.append(ScheduleTrip(rng.choice(["bus", "tram"]), "X",
                                          (o[0] + rng.uniform(-0.003, 0.003), o[1] + rng.uniform(-0.003, 0.003)),
                                          (d[0] + rng.uniform(-0.003, 0.003), d[1] + rng.uniform(-0.003, 0.003)),
                                          dep, dep + rng.randint(600, 1400)))
            dep = rng.randint(9_500, 10_500)
            arr = dep + rng.randint(600, 1400)
            assert find_trip(sample(*o, 0), sample(*d, 0), dep, arr, trips, CFG) == _scan(trips, o, d, dep, arr)


def _segment(rng, t):
    label = rng.choice(list(ActivityLabel))
    dur = rng.randint(0, 3600)
    a, b = sample(41.4, 2.1, t * 1000), sample(41.4, 2.1, (t + dur) * 1000)
    if label is ActivityLabel.STILL:
        return Segment(label, a, b, 0.0, dur, 0.0, (a,)), t + dur
    return Segment(label, a, b, rng.uniform(0, 30_000), dur, rng.uniform(0, 80), (a, b)), t + dur


def test_7_metrics():
    with criterion(7, "calories, CO2 per km, additive daily totals"):
        assert calories_kcal(142, 1.2599, 70) == pytest.approx(6.3505, abs=1e-3)
        assert co2_saved_g(1000.0) == 140.0
        rng = random.Random(5)
        for _ in range(100):
            t = 0
            segs = []
            for _ in range(rng.randint(0, 20)):
                s, t = _segment(rng, t)
                segs.append(s)
            cut = rng.randint(0, len(segs))
            w = rng.uniform(40, 120)
            whole = daily_totals(segs, w)
            parts = daily_totals(segs[:cut], w) + daily_totals(segs[cut:], w)
            assert whole.kcal == pytest.approx(parts.kcal, rel=1e-12, abs=1e-12)
            assert whole.co2_g == pytest.approx(parts.co2_g, rel=1e-12, abs=1e-12)


def test_8_store():
    with criterion(8, "serialization normal form, daily path, identities"):
        rng = random.Random(8)
        day = date(2014, 12, 16)
        for _ in range(50):
            t = 1418684400 + rng.randint(0, 70_000)
            segs = []
            for _ in range(rng.randint(0, 8)):
                label = rng.choice(list(ActivityLabel))
                n = 1 if label is ActivityLabel.STILL else rng.randint(0, 6)
                start = t
                pts = []
                for _ in range(n):
                    t += rng.randint(0, 300)
                    pts.append(sample(rng.uniform(-90, 90), rng.uniform(-180, 180), t * 1000))
                t += rng.randint(0, 300)
                a, b = sample(0, 0, start * 1000), sample(0, 0, t * 1000)
                if label is ActivityLabel.STILL:
                    segs.append(Segment(label, a, b, 0.0, t - start, 0.0, tuple(pts)))
                else:
                    line = rng.choice([None, "L5"]) if label.is_transit else None
                    segs.append(Segment(label, a, b, rng.uniform(0, 1e5), t - start, rng.uniform(0, 100), tuple(pts), line))
            first = dumps_segments(segs, tz=CET)
            assert dumps_segments(loads_segments(first, day, CET), tz=CET) == first
        ident = UserIdentity("5a" * 32)
        assert str(daily_path("/data/uploads", ident, day)).endswith("16-12-2014.json")
        for _ in range(10_000):
            h = generate_identity().id_hex
            assert len(h) == 64 and all(c in "0123456789abcdef" for c in h)


def _run(name, network, schedule, scenario=None):
    scenario = scenario or preset(name, network)
    segments, _ = segment_trace(generate(scenario), CFG, network)
    return scenario, post_process(segments, schedule, network, CFG)


def test_9_end_to_end_presets(network, schedule):
    with criterion(9, "journey4 walk, journey2 metro L3, journey1 buses and car"):
        _, walk = _run("journey4", network, schedule)
        assert walk and {s.activity for s in walk} <= {ActivityLabel.ON_FOOT, ActivityLabel.STILL}
        assert ActivityLabel.ON_FOOT in {s.activity for s in walk}

        clean = replace(preset("journey2", network), activity_noise=0.0, position_noise=0.0)
        _, metro = _run("journey2", network, schedule, clean)
        assert [s.line for s in metro if s.activity is ActivityLabel.METRO] == ["L3"]

        scenario, day = _run("journey1", network, schedule)
        bus_lines = [t.line for t in scheduled_trips(scenario)]
        assert [s.line for s in day if s.activity is ActivityLabel.BUS] == bus_lines == ["V7", "H8"]
        assert not any(s.activity in (ActivityLabel.TRAM, ActivityLabel.TRAIN, ActivityLabel.METRO) for s in day)
        vehicles = [s for s in day if s.activity is ActivityLabel.VEHICLE]
        assert vehicles and vehicles[0].first_location.timestamp < min(
            s.first_location.timestamp for s in day if s.activity is ActivityLabel.BUS)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-v"]))
