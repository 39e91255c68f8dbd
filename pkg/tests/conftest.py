import time
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_criteria: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    t0 = time.perf_counter()
    yield
    item.user_properties.append(("elapsed", time.perf_counter() - t0))


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = dict(report.user_properties).get("criterion")
    if mark is None:
        return
    n, title = mark
    entry = _criteria.setdefault(n, {"title": title, "ok": True, "elapsed": 0.0})
    entry["ok"] = entry["ok"] and report.outcome == "passed"
    entry["elapsed"] += dict(report.user_properties).get("elapsed", 0.0)


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        e = _criteria[n]
        verdict = "PASS" if e["ok"] else "FAIL"
        terminalreporter.write_line(f"criterion {n}: {verdict}  {e['title']}  ({e['elapsed']:.1f}s)")


@pytest.fixture
def fixtures():
    return FIXTURES
