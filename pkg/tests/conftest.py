import time
from datetime import datetime, timedelta, timezone

import pytest

from mobiseg.model import LocationSample, PipelineConfig, load_network, load_schedule

CET = timezone(timedelta(hours=1))

# Six walking fixes from a recorded on_foot segment (16 Dec 2014, CET).
ON_FOOT_TRAIL = [
    (41.441145, 2.1659081, "09:46:44.900"),
    (41.4410568, 2.1660705, "09:47:11.000"),
    (41.441012, 2.1661082, "09:47:32.000"),
    (41.4409738, 2.1661926, "09:48:13.000"),
    (41.440959, 2.1662142, "09:48:34.000"),
    (41.4410113, 2.1663986, "09:49:07.000"),
]


def cet_ms(hms: str, day: str = "2014-12-16") -> int:
    t = datetime.strptime(f"{day} {hms}", "%Y-%m-%d %H:%M:%S.%f").replace(tzinfo=CET)
    return int(round(t.timestamp() * 1000))


def sample(lat, lon, t_ms, accuracy=20.0, wifi=True):
    return LocationSample(lat, lon, accuracy, t_ms, wifi)


def on_foot_samples():
    return [sample(lat, lon, cet_ms(t), 15.0) for lat, lon, t in ON_FOOT_TRAIL]


@pytest.fixture(scope="session")
def network():
    return load_network()


@pytest.fixture(scope="session")
def schedule():
    return load_schedule()


@pytest.fixture
def config():
    return PipelineConfig()


SUITE_BUDGET_S = 60.0
_session = {}


def pytest_sessionstart(session):
    _session["start"] = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", {})
    if not results:
        return
    elapsed = time.perf_counter() - _session["start"]
    terminalreporter.section("acceptance")
    for number in sorted(results):
        terminalreporter.write_line(results[number])
    status = "PASS" if elapsed < SUITE_BUDGET_S else "FAIL"
    terminalreporter.write_line(f"suite runtime: {status}  {elapsed:.1f} s (budget {SUITE_BUDGET_S:.0f} s)")


def pytest_sessionfinish(session, exitstatus):
    if time.perf_counter() - _session.get("start", time.perf_counter()) >= SUITE_BUDGET_S and exitstatus == 0:
        session.exitstatus = 1
