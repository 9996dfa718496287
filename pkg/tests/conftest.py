import json
from pathlib import Path

import pytest

from mpec_kit.instance import read_instance

ROOT = Path(__file__).resolve().parent.parent
INSTANCES = ROOT / "instances"

_criteria: dict[int, tuple[str, bool]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def corpus():
    def load(name):
        return read_instance(INSTANCES / f"{name}.json")

    return load


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    num, title = crit
    prev = _criteria.get(num, (title, True))[1]
    _criteria[num] = (title, prev and report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep.criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(_criteria):
        title, ok = _criteria[num]
        tr.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {title}")
    passed = sum(ok for _, ok in _criteria.values())
    tr.write_line(f"{passed}/{len(_criteria)} criteria passed")
