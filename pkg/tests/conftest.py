import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("shenet", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("shenet")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
