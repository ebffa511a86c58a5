"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""

import pytest

_criteria = {}


def _entry(number, title):
    return _criteria.setdefault(number, {"title": title, "ok": True, "notes": []})


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        entry = _entry(*marker.args)
        xfailed = hasattr(rep, "wasxfail")
        if rep.outcome != "passed" or xfailed:
            entry["ok"] = False
            entry["notes"].append(f"{item.name}: {'expected failure' if xfailed else rep.outcome}")


@pytest.fixture
def note(request):
    """Attach a measured value to the criterion of the calling test."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        _entry(*marker.args)["notes"].append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        tr.write_line(f"criterion {number:2d}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}")
        for n in e["notes"]:
            tr.write_line(f"      {n}")
