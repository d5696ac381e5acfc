import pytest

# one line per acceptance criterion, filled by tests/test_acceptance.py
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    def record(num: int, passed: bool, detail: str):
        line = f"criterion {num}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE[num] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[num])
