import datetime as dt
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from smartsocket.config import ServiceConfig  # noqa: E402

SERVER = "+10000000000"
RELATIVE = "+37126000001"
DAY1 = dt.date(2015, 2, 10)


def ts(text):
    return dt.datetime.fromisoformat(text)


def cooker_scenario(days=3, skip_day4=True):
    """The 10:30 cooker routine: switch-on on ``days`` days, then a quiet day 4."""
    lines = [f"{DAY1.isoformat()}T08:00:00 SMS_TO_SOCKET S001 CFG {SERVER}"]
    for i in range(days):
        d = (DAY1 + dt.timedelta(days=i)).isoformat()
        lines += [f"{d}T10:30:00 SAMPLE S001 0.5",
                  f"{d}T10:30:05 SAMPLE S001 0.5",
                  f"{d}T10:50:00 SAMPLE S001 0.0"]
    last = (DAY1 + dt.timedelta(days=days)).isoformat()
    lines.append(f"{last}T12:00:00 SAMPLE S001 0.0")
    return "\n".join(lines) + "\n"


@pytest.fixture
def make_config(tmp_path):
    def make(**kw):
        base = dict(
            server_address=SERVER,
            log_path=tmp_path / "events.log",
            dead_letter_path=tmp_path / "dead_letters.log",
            journal_path=tmp_path / "deliveries.log",
            outbox_dir=tmp_path / "outbox",
            recipients={"*": [RELATIVE]},
            fsync=False,
        )
        base.update(kw)
        return ServiceConfig(**base)
    return make


# -- acceptance reporting ------------------------------------------------------

ACCEPTANCE_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and report.failed):
        ACCEPTANCE_RESULTS[number] = (title, report.passed, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok, duration = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"[{'PASS' if ok else 'FAIL'}] AC{number} {title} ({duration:.2f}s)")
