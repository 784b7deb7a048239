"""Shared pytest plumbing for the suite.

Acceptance tests push their measured outcome into a registry before
asserting, so the terminal summary always shows one line per criterion
even when an assert fires.
"""

_criteria = {}


def record_criterion(number, passed, detail):
    _criteria[int(number)] = (bool(passed), str(detail))
    return bool(passed)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criteria:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_criteria):
        passed, detail = _criteria[num]
        terminalreporter.write_line(
            f"[{'PASS' if passed else 'FAIL'}] criterion {num}: {detail}"
        )
