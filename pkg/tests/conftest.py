"""Shared pytest hooks.

The acceptance tests register one summary line per criterion; printing
them from a terminal_summary hook keeps them visible in a plain
``pytest`` run, where stdout of passing tests is captured.
"""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
