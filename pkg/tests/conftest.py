import pytest
from hypothesis import HealthCheck, settings

from sdpfit import scheduling_instance

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def one_machine():
    """Jobs (w=1, p=1) and (w=1, p=2) on a single machine."""
    return scheduling_instance([[1.0], [2.0]], [1.0, 1.0])


@pytest.fixture
def two_by_two():
    """Two identical unit jobs on two identical machines."""
    return scheduling_instance([[1.0, 1.0], [1.0, 1.0]], [1.0, 1.0])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
