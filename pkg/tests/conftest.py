from pathlib import Path

import pytest
from hypothesis import settings

DATA = Path(__file__).resolve().parents[1] / "src" / "gridhaul" / "data"

settings.register_profile("default", deadline=None)
settings.load_profile("default")


@pytest.fixture
def data_dir() -> Path:
    return DATA


_verdicts: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    number, title = marker.args
    failed = report.failed
    if report.when == "call" or failed:
        prev = _verdicts.get(number, ("PASS", title))[0]
        _verdicts[number] = ("FAIL" if failed or prev == "FAIL" else "PASS", title)


def pytest_terminal_summary(terminalreporter):
    if not _verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_verdicts):
        verdict, title = _verdicts[number]
        terminalreporter.write_line(f"{verdict} criterion {number}: {title}")
