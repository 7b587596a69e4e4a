from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from hemodelay import default_params, scan

import checks

settings.register_profile(
    "suite",
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def params():
    return default_params()


@pytest.fixture(scope="session")
def default_grid(params):
    return checks.make_grid(params)


@pytest.fixture(scope="session")
def scan_result(params, default_grid):
    return scan(params, default_grid, 1)


@pytest.fixture(scope="session")
def standard_runs():
    """The four long simulations behind the regime and period claims."""
    return {t: checks.run_case(t, checks.RUN_WINDOWS) for t in checks.RUN_WINDOWS}


@pytest.fixture(scope="session")
def probe_runs():
    """Short-offset runs bracketing each stability switch (0.05 away)."""
    return {t: checks.run_case(t, checks.PROBE_WINDOWS) for t in checks.PROBE_WINDOWS}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not checks.ACCEPTANCE_LOG:
        return
    terminalreporter.section("acceptance criteria")
    for num, passed, detail in sorted(checks.ACCEPTANCE_LOG):
        terminalreporter.write_line(f"[{num}] {'PASS' if passed else 'FAIL'} {detail}")
