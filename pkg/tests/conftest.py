import numpy as np
import pytest

from lpvss.models import scalar_lti, two_state_lpv


@pytest.fixture
def scalar():
    return scalar_lti()


@pytest.fixture(scope="session")
def two_state():
    return two_state_lpv()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.__dict__.setdefault("_lpvss_acceptance", [])

    def record(name, ok, detail=""):
        lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        print(lines[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_lpvss_acceptance", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
