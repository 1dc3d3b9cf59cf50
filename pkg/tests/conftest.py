"""Shared test reporting.

Release-gate tests record one verdict line per criterion; echoing them
in the terminal summary keeps them visible under output capture.
"""

VERDICTS: list = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in VERDICTS:
            terminalreporter.line(line)
