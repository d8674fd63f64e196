import os
import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _quiet_linalg():
    # scipy warns on ill-conditioned solves inside the damping loop; the
    # condition estimate is checked explicitly
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        try:
            from scipy.linalg import LinAlgWarning

            warnings.simplefilter("ignore", category=LinAlgWarning)
        except ImportError:  # pragma: no cover
            pass
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


#: (criterion number, line) pairs recorded by the acceptance suite
ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record the verdict line of one acceptance criterion."""

    def record(number: int, name: str, passed: bool, detail: str, runtime: float):
        line = f"{'PASS' if passed else 'FAIL'} criterion {number} [{name}]: {detail} (runtime {runtime:.1f} s)"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
