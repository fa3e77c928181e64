import pytest

from bslab.measure import circle


@pytest.fixture(scope="session")
def circle512():
    return circle(1.0, 512)


@pytest.fixture(scope="session")
def circle512_r2():
    return circle(2.0, 512)


def pytest_terminal_summary(terminalreporter):
    # acceptance criteria report one line each, in criterion order
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[num])


@pytest.fixture(scope="session")
def circle512_states(circle512):
    from bslab.spectral import solve_bound_state

    return {a: solve_bound_state(circle512, a) for a in (0.4, 0.2, 0.1)}
