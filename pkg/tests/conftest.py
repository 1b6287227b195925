import pytest

ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the assertion is left to the test."""

    def report(number: int, ok: bool, detail: str) -> bool:
        ACCEPTANCE.append(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        print(ACCEPTANCE[-1])
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda l: int(l.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
