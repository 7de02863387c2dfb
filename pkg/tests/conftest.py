"""Shared test plumbing.

Acceptance tests register their PASS/FAIL lines here so they show up in
the terminal summary even under default output capture.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
