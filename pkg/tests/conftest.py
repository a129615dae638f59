import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("ntalab", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ntalab")


@pytest.fixture(scope="session")
def profile():
    from ntalab.cones import solve_profile_ode

    return solve_profile_ode()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = [line for name, mod in list(sys.modules.items()) if name.endswith("test_acceptance")
             for line in getattr(mod, "LINES", [])]
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)
