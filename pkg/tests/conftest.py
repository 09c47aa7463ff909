import pytest

from pv_elliptic.curve_periods import solve_boutroux

PHI = 0.7


@pytest.fixture(scope="session")
def bd():
    """Boutroux data on the reference ray."""
    return solve_boutroux(PHI)


@pytest.fixture(scope="session")
def ell(bd):
    return bd.ell


_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def acceptance(request):
    """``record(n, ok, detail)`` prints one acceptance line and keeps it for the summary."""
    lines = request.config.stash[_LINES]

    def record(n, ok, detail):
        line = f"acceptance {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
