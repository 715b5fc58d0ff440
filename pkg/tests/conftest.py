"""Shared pytest hooks: surface acceptance PASS/FAIL lines in the log."""

acceptance_results = []


def record_acceptance(line):
    acceptance_results.append(line)


def pytest_terminal_summary(terminalreporter):
    if acceptance_results:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_results:
            terminalreporter.write_line(line)
