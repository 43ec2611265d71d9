import pytest

from hybrid_pressure.network import PhysicalParams, build_grid


@pytest.fixture(scope="session")
def params():
    return PhysicalParams()


@pytest.fixture(scope="session")
def single(params):
    return build_grid(1, 1, params)


@pytest.fixture(scope="session")
def grid3(params):
    return build_grid(3, 3, params)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
