from functools import lru_cache

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from daviesmix.davies import davies_generator
from daviesmix.models import build_cluster, build_ising

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

MODELS = {"ising": build_ising, "cluster": build_cluster}
CRITERIA: list[tuple[str, bool, str]] = []


@lru_cache(maxsize=None)
def hamiltonian(model: str, n: int, boundary: str = "periodic"):
    return MODELS[model](n, boundary)


@lru_cache(maxsize=None)
def _cached_generator(model, n, beta, rate_fn):
    return davies_generator(hamiltonian(model, n), beta, rate_fn=rate_fn)


def generator(model: str, n: int, beta: float, rate_fn: str = "glauber"):
    """Shared generator for small chains; n >= 6 is rebuilt to bound memory."""
    if n >= 6:
        return davies_generator(hamiltonian(model, n), beta, rate_fn=rate_fn)
    return _cached_generator(model, n, beta, rate_fn)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record a PASS/FAIL line for the acceptance summary and assert it."""

    def record(label: str, ok: bool, detail: str = ""):
        CRITERIA.append((label, bool(ok), detail))
        print(f"{label}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"{label} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in CRITERIA:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
