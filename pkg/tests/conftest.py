"""Shared fixtures: frequency profiles, the desk configuration, and the
session-scoped desk pipeline reused by the acceptance tests.

A terminal-summary hook prints one PASS/FAIL line per acceptance criterion
(tests named test_criterion_NN_*) at the end of the run.
"""
from __future__ import annotations

import re
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from kamtori.config import load_config
from kamtori.cli import _run_pipeline
from kamtori.diophantine import build_profile, preset_frequency
from kamtori.iterate import iterate

settings.register_profile(
    "suite",
    max_examples=60,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")

REPO = Path(__file__).resolve().parent.parent
DESK_CONFIG = REPO / "configs" / "desk.toml"


@pytest.fixture(scope="session")
def golden():
    return preset_frequency("golden")


@pytest.fixture(scope="session")
def sqrt2():
    return preset_frequency("sqrt2")


@pytest.fixture(scope="session")
def golden_profile(golden):
    # same table depth as the desk configuration, so frozen values match
    return build_profile(golden, 20000)


@pytest.fixture(scope="session")
def desk_config():
    return load_config(DESK_CONFIG)


@pytest.fixture(scope="session")
def desk_reduction(desk_config):
    """(omega, spec, profile, reduction) for the desk configuration."""
    return _run_pipeline(desk_config)


@pytest.fixture(scope="session")
def desk_result(desk_config, desk_reduction):
    """Full desk iteration (the criterion-5 run), timed once per session."""
    _, _, profile, red = desk_reduction
    t0 = time.perf_counter()
    result = iterate(red.hamiltonian, profile,
                     desk_config.scheme.iteration_settings())
    elapsed = time.perf_counter() - t0
    return result, elapsed


# --- acceptance criterion summary -----------------------------------------

_CRITERION = re.compile(r"test_criterion_(\d+)([a-z]?)_")
_criterion_outcomes: dict = {}


def pytest_runtest_logreport(report):
    m = _CRITERION.search(report.nodeid)
    if not m or report.when != "call":
        return
    label = report.nodeid.split("::")[-1]
    if report.passed:
        verdict = "PASS"
    elif report.skipped:
        # strict xfail of a documented-impossible sub-criterion
        verdict = "XFAIL (documented)" if hasattr(report, "wasxfail") else "SKIP"
    else:
        verdict = "FAIL"
    _criterion_outcomes[(m.group(1), m.group(2), label)] = verdict


def pytest_terminal_summary(terminalreporter):
    if not _criterion_outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for (num, sub, label), verdict in sorted(_criterion_outcomes.items()):
        terminalreporter.write_line(
            f"CRITERION {num}{sub:>1}: {verdict}  [{label}]")
