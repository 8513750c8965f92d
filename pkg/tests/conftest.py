"""Shared pytest wiring: surface the acceptance PASS/FAIL lines.

The acceptance tests append one line per criterion; printing them from the
terminal-summary hook keeps them visible despite output capture.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
