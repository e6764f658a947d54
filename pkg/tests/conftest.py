import os
import random

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=500,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture
def pyrng():
    return random.Random(12345)


def pytest_terminal_summary(terminalreporter):
    from ._acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        status, title, secs, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title} ({secs:.2f} s) {detail}")
