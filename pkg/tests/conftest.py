import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from polyvar.periodic import build_quotient, random_periodic_environment, stripes

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def stripes_q():
    env, R = stripes()
    return build_quotient(env, R)


def quotient_from_seed(seed, max_states=8):
    rng = np.random.default_rng(seed)
    env, R = random_periodic_environment(rng, max_cells=max_states)
    return build_quotient(env, R), rng


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
