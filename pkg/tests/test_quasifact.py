import numpy as np
import pytest

from conftest import generator
from daviesmix.condexp import conditional_expectation
from daviesmix.davies import davies_generator
from daviesmix.geometry import two_block_geometry
from daviesmix.models import build_ising
from daviesmix.quasifact import (QFReport, QuasiFactorizationViolation, _empirical, qf_verify_combined,
                                 qf_verify_global, qf_verify_local)
from daviesmix.states import random_density


def test_sigma_probe_gives_zero_slack():
    gen = generator("ising", 4, 1.0)
    reports = qf_verify_global([gen.sigma], gen.sigma, two_block_geometry(4, 1))
    for r in reports:
        if r.applicable:
            assert abs(r.lhs) <= 1e-12 and abs(r.rhs) <= 1e-12


def test_infinite_temperature_global(rng):
    sigma = np.eye(16) / 16
    probes = [random_density(16, rng) for _ in range(20)]
    reports = qf_verify_global(probes, sigma, two_block_geometry(4, 1))
    assert [r.kind for r in reports] == ["global-AB", "global-segments"]
    for r in reports:
        assert r.constant == pytest.approx(1.0)
        assert r.passed and r.n_probes == 20


def test_local_constant_without_interactions(rng):
    gen = davies_generator(build_ising(4, J=0.0), 0.0)
    probes = [random_density(16, rng) for _ in range(100)]
    rep = qf_verify_local(probes, gen, [1, 2])
    assert rep.constant <= 2.0
    # strong subadditivity makes the constant at most one here
    assert rep.constant <= 1.0 + 1e-9 and rep.passed


def test_local_constant_at_finite_temperature(rng):
    gen = generator("cluster", 4, 1.0)
    probes = [0.5 * random_density(16, rng) + 0.5 * gen.sigma for _ in range(10)]
    E_X = conditional_expectation(gen, [1, 2])
    rep = qf_verify_local(probes, gen, [2, 1], E_X=E_X)
    assert rep.detail == {"region": [1, 2]}
    assert rep.passed and rep.constant > 0


def test_combined_at_infinite_temperature(rng):
    gen = davies_generator(build_ising(4, J=0.0), 0.0)
    probes = [random_density(16, rng) for _ in range(5)]
    cover, chain = qf_verify_combined(probes, gen, two_block_geometry(4, 1), alpha_hat=1.0)
    assert cover.kind == "cover" and cover.passed
    assert chain.kind == "chain"
    assert chain.detail["alpha0_site"] > 0


def test_vanishing_rhs_is_a_violation():
    with pytest.raises(QuasiFactorizationViolation):
        _empirical("local", [(0.5, 0.0)])
    rep = _empirical("local", [(0.0, 0.0), (1.0, 2.0), (3.0, 4.0)])
    assert rep.constant == pytest.approx(0.75) and rep.slack == pytest.approx(0.0)


def test_inapplicable_report():
    r = QFReport("global-AB", float("nan"), float("nan"), None, float("nan"), False)
    assert r.passed is None and r.to_dict()["passed"] is None
