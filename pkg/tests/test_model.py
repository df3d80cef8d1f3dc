import json

import pytest

from mobiseg.model import (
    ActivityLabel,
    ActivityWindowCounts,
    LocationSample,
    PipelineConfig,
    ScheduleTrip,
    Segment,
    VehicleType,
    dump_schedule,
    load_network,
    load_schedule,
    validate_network,
)


def _pt(t=0, lat=41.4, lon=2.1):
    return LocationSample(lat, lon, 10.0, t)


@pytest.mark.parametrize(
    "text, label",
    [("on_foot", ActivityLabel.ON_FOOT), ("Vehicle", ActivityLabel.VEHICLE), ("renfe", ActivityLabel.TRAIN),
     (" metro ", ActivityLabel.METRO), (ActivityLabel.BUS, ActivityLabel.BUS)],
)
def test_label_parse(text, label):
    assert ActivityLabel.parse(text) is label


def test_label_parse_rejects_unknown():
    with pytest.raises(ValueError):
        ActivityLabel.parse("hovercraft")


def test_label_groups():
    assert all(l.is_raw != l.is_transit for l in ActivityLabel)
    assert str(ActivityLabel.ON_FOOT) == "on_foot"
    assert VehicleType.parse(VehicleType.TRAM).label is ActivityLabel.TRAM


@pytest.mark.parametrize("lat, lon", [(91, 0), (-90.5, 0), (0, 181)])
def test_sample_rejects_bad_coordinates(lat, lon):
    with pytest.raises(ValueError):
        LocationSample(lat, lon, 10.0, 0)


def test_sample_rejects_nonpositive_accuracy():
    with pytest.raises(ValueError):
        LocationSample(41.0, 2.0, 0.0, 0)


def test_counts_reject_negative():
    with pytest.raises(ValueError):
        ActivityWindowCounts(vehicle_count=-1)


def test_still_segment_invariants():
    a, b = _pt(0), _pt(60_000)
    Segment(ActivityLabel.STILL, a, b, 0.0, 60, 0.0, (a,))
    with pytest.raises(ValueError):
        Segment(ActivityLabel.STILL, a, b, 3.0, 60, 0.0, (a,))
    with pytest.raises(ValueError):
        Segment(ActivityLabel.STILL, a, b, 0.0, 60, 0.0, (a, b))


def test_segment_line_only_on_transit():
    a, b = _pt(0), _pt(60_000)
    Segment(ActivityLabel.METRO, a, b, 1.0, 60, 0.06, (a, b), line="L3")
    with pytest.raises(ValueError):
        Segment(ActivityLabel.VEHICLE, a, b, 1.0, 60, 0.06, (a, b), line="L3")


def test_segment_time_order():
    with pytest.raises(ValueError):
        Segment(ActivityLabel.ON_FOOT, _pt(5000), _pt(0), 1.0, 5, 0.7, ())


def test_config_defaults_and_validation(tmp_path):
    c = PipelineConfig()
    assert (c.window_seconds, c.good_accuracy_m, c.bad_accuracy_m, c.block_radius_m) == (120, 200, 1000, 100)
    assert (c.departure_margin_s, c.arrival_margin_s, c.gps_max_windows) == (300, 180, 2)
    with pytest.raises(ValueError):
        PipelineConfig(good_accuracy_m=1000, bad_accuracy_m=200)
    with pytest.raises(ValueError):
        PipelineConfig(window_seconds=0)
    with pytest.raises(TypeError):
        PipelineConfig(window_seconds="120")
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"window_secs": 60})
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"block_radius_m": 80}))
    assert PipelineConfig.from_json(path).block_radius_m == 80


def test_bundled_network_valid(network):
    assert validate_network(network) == []
    assert set(network.line_orders) == {"L3", "L5"}
    assert network.lines_serving("vall d'hebron") == ["L3", "L5"]
    assert network.station("L3", "Canyelles").id == "387"


def test_validate_network_reports_problems():
    net = load_network()
    net.line_orders["L3"].append("Nowhere")
    net.metro_stations.append(net.metro_stations[0])
    problems = validate_network(net)
    assert any("Nowhere" in p for p in problems)
    assert any("appears 2 times" in p for p in problems)


def test_schedule_round_trip(tmp_path, schedule):
    path = tmp_path / "s.json"
    dump_schedule(schedule, path)
    assert load_schedule(path) == schedule


def test_schedule_trip_order():
    with pytest.raises(ValueError):
        ScheduleTrip("bus", "V7", (41.0, 2.0), (41.1, 2.1), 100, 100)
