CRITERIA: dict = {}


def record(number: int, passed: bool, detail: str) -> None:
    """Keep one pass/fail line per acceptance criterion for the summary."""
    CRITERIA[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])
