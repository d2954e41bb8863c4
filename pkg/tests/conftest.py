"""Collects acceptance outcomes and prints one line per criterion at the end of the run."""

from __future__ import annotations

from collections import defaultdict

import pytest

_RESULTS: dict[int, list[tuple[str, str]]] = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _RESULTS[int(marker.args[0])].append((item.name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        runs = _RESULTS[number]
        failed = [name for name, outcome in runs if outcome != "passed"]
        status = "PASS" if not failed else "FAIL"
        detail = f"{len(runs) - len(failed)}/{len(runs)} checks passed"
        if failed:
            detail += "; failing: " + ", ".join(failed)
        terminalreporter.write_line(f"criterion {number:>2}: {status}  ({detail})")
