import pytest

from sphcalc.spherical_transform import calibrated_space

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def h2():
    return calibrated_space(2)


@pytest.fixture(scope="session")
def h3():
    return calibrated_space(3)


@pytest.fixture(scope="session", params=[2, 3], ids=["h2", "h3"])
def space(request):
    return calibrated_space(request.param)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
