import warnings

import pytest

from sobstab import WindowWarning, make_params
from sobstab.fields import default_grid


@pytest.fixture(scope="session")
def p22():
    return make_params(2, 2)


@pytest.fixture(scope="session")
def p13():
    return make_params(1, 3)


@pytest.fixture(scope="session")
def grid22(p22):
    return default_grid(p22, Lmax=1)


@pytest.fixture(autouse=True)
def _quiet_window_warnings():
    # window diagnostics are exercised explicitly where they matter
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WindowWarning)
        yield


_LINES = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(_LINES, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
