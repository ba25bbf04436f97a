"""Prints one PASS/FAIL/SKIP line per acceptance criterion at the end of the run."""

import re

_CRITERIA: dict[str, str] = {}


def pytest_runtest_logreport(report):
    match = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not match:
        return
    key = f"criterion {int(match.group(1)):>2} {match.group(2)}"
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        if report.outcome == "passed" and _CRITERIA.get(key) == "FAIL":
            return
        _CRITERIA[key] = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_CRITERIA, key=lambda k: int(k.split()[1])):
        terminalreporter.write_line(f"{key}: {_CRITERIA[key]}")
