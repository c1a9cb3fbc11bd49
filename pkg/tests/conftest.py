ACCEPTANCE_LINES: list[str] = []


def report(check):
    """Print an acceptance result and keep it for the end-of-run summary."""
    line = check.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    return check


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
