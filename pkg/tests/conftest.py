import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from condgraph.objective import make_f_eps, make_f_lrp, make_quadratic  # noqa: E402


@pytest.fixture(scope="session")
def f_lrp():
    return make_f_lrp()


@pytest.fixture(scope="session")
def quad_1_10():
    return make_quadratic([1.0, 10.0])


@pytest.fixture(scope="session")
def f_eps01():
    return make_f_eps(0.1)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance summary")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
