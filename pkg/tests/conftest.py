"""Shared pytest wiring for the suite.

The acceptance battery in test_acceptance.py carries numbered criteria; this
hook prints one ``ACCEPTANCE n: PASS`` (or ``FAIL``) line per criterion in the
terminal summary so the verdicts are visible without -s.
"""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)")

_verdicts = {}


def pytest_runtest_logreport(report):
    match = _CRITERION.search(report.nodeid)
    if not match:
        return
    n = int(match.group(1))
    if report.when == "call":
        _verdicts[n] = report.outcome == "passed"
    elif report.outcome not in ("passed",):
        # setup/teardown error counts as a failed criterion
        _verdicts[n] = False


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _verdicts:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for n in sorted(_verdicts):
        terminalreporter.write_line(
            f"ACCEPTANCE {n}: {'PASS' if _verdicts[n] else 'FAIL'}")
