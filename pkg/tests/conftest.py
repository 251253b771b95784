import pytest

from shorfluct import RegisterLayout, run_clean

# Lines recorded by the acceptance suite, echoed in the terminal summary.
ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def layout21():
    return RegisterLayout(21, 2, 10, 5)


@pytest.fixture(scope="session")
def clean21(layout21):
    """Every state of the N=21 run, dense backend."""
    return run_clean(layout21, "dense")


@pytest.fixture(scope="session")
def clean21_structured(layout21):
    return run_clean(layout21, "structured")
