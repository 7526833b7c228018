"""Shared fixtures plus the acceptance-criteria summary reporter.

The acceptance tests register one PASS/FAIL line each; the terminal
summary hook prints them after the run so the verdicts are visible
even under captured output.
"""

import pytest
from hypothesis import settings

import replicast as rc

settings.register_profile("suite", deadline=None, max_examples=60)
settings.load_profile("suite")

_ACCEPTANCE_LINES = {}


def record_criterion(num: int, passed: bool, detail: str) -> None:
    verdict = "PASS" if passed else "FAIL"
    _ACCEPTANCE_LINES[num] = f"criterion {num}: {verdict}  {detail}"


@pytest.fixture(scope="session")
def criterion():
    """Callable(num, passed, detail) recording one acceptance verdict."""
    return record_criterion


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for num in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(_ACCEPTANCE_LINES[num])


# Reference setting shared across the end-to-end tests: an infinite-server
# workload with 0.2 s exponential service, profiled at nine per-container
# rate levels covering [0.5, 20] req/s.
REF_MEAN_SERVICE_S = 0.2
REF_PROFILE_RATES = (0.5, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0)


@pytest.fixture(scope="session")
def ref_workload():
    return rc.WorkloadModel(kind=rc.WORKLOAD_INFINITE_SERVER, mean_s=REF_MEAN_SERVICE_S)


@pytest.fixture(scope="session")
def ref_trace(ref_workload):
    return rc.profile_trace(
        ref_workload,
        REF_PROFILE_RATES,
        metric_kind=rc.METRIC_CONCURRENCY,
        duration_s=2700.0,
        warmup_s=300.0,
        seed=1000,
    )


@pytest.fixture(scope="session")
def ref_bundle(ref_trace):
    return rc.fit_bundle(ref_trace, rc.METRIC_CONCURRENCY)
