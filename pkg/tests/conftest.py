import pytest

from persuaded_search.prior import Prior

ACCEPTANCE_RESULTS = {}


@pytest.fixture(scope="session")
def uniform():
    return Prior.uniform()


@pytest.fixture(scope="session")
def beta22():
    return Prior.beta_dist(2, 2)


@pytest.fixture(params=["uniform01", "beta22"], scope="session")
def prior(request):
    return Prior.uniform() if request.param == "uniform01" else Prior.beta_dist(2, 2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        ok, text = ACCEPTANCE_RESULTS[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {text}")
