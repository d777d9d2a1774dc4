import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cdspaces.measure import SpaceParams, build_grid
from cdspaces.profiles import DEFAULT_K, preset

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

K_MAIN = DEFAULT_K


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture(scope="session")
def valley_space():
    return SpaceParams(preset("valley", K_MAIN), K_MAIN)


@pytest.fixture(scope="session")
def constant_space():
    return SpaceParams(preset("constant", K_MAIN), K_MAIN)


@pytest.fixture(scope="session")
def ramp_space():
    return SpaceParams(preset("ramp-smoothed", K_MAIN), K_MAIN, singular=True)


@pytest.fixture(scope="session")
def valley_grid(valley_space):
    return build_grid(valley_space, 64, 16)


_ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    entry = {"name": request.node.name, "detail": ""}

    def record(ok, detail):
        entry["ok"] = bool(ok)
        entry["detail"] = detail
        print(f"[{'PASS' if ok else 'FAIL'}] {request.node.name}: {detail}")

    yield record
    if "ok" not in entry:
        entry["ok"] = False
        entry["detail"] = "did not complete"
    _ACCEPTANCE.append(entry)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for e in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if e['ok'] else 'FAIL'}  {e['name']}: {e['detail']}")
