import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sitcontrol import Params

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

GAMMAS = (0.04, 0.06, 0.08, 0.1)


@pytest.fixture
def p04():
    return Params.mosquito(0.04)


@pytest.fixture(params=GAMMAS, ids=lambda g: f"gamma={g}")
def params(request):
    return Params.mosquito(request.param)


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


_CRITERIA_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, then assert."""
    lines = request.config.stash.setdefault(_CRITERIA_KEY, [])

    def report(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:>2}: {detail}"
        print(line)
        lines.append((number, line))
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
