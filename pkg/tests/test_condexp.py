import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import generator
from daviesmix.condexp import (conditional_expectation, detectability, product_expectation_distance,
                               semigroup_limit_check)
from daviesmix.davies import davies_generator
from daviesmix.models import build_ising
from daviesmix.sectors import KernelAmbiguityError
from daviesmix.states import Z, random_density
from daviesmix.tensor import SiteIndexing, partial_trace

seeds = st.integers(0, 2**32 - 1)


@pytest.mark.parametrize("model,beta,region", [("ising", 1.0, [1]), ("cluster", 0.7, [0, 1]), ("cluster", 2.0, [2])])
def test_expectation_is_a_conditional_expectation(model, beta, region):
    gen = generator(model, 3, beta)
    E = conditional_expectation(gen, region)
    assert E.idempotence_residual() <= 1e-10
    assert E.sigma_residual() <= 1e-10
    assert E.selfadjoint_residual() <= 1e-10
    assert E.choi_min_eig() >= -1e-10
    rng = np.random.default_rng(1)
    assert E.trace_residual([random_density(8, rng) for _ in range(5)]) <= 1e-12


@given(seeds)
def test_expectation_kills_the_local_generator(seed):
    gen = generator("cluster", 3, 1.0)
    E = conditional_expectation(gen, [1])
    rho = random_density(8, np.random.default_rng(seed))
    local = gen.restrict([1])
    assert np.allclose(local(E(rho)), 0, atol=1e-10)
    assert np.allclose(E(local(rho)), 0, atol=1e-10)


def test_full_region_projects_to_sigma(rng):
    gen = generator("ising", 3, 1.0)
    E = conditional_expectation(gen)
    rho = random_density(8, rng)
    assert np.allclose(E(rho), gen.sigma, atol=1e-10)


def test_infinite_temperature_is_partial_depolarization(rng):
    gen = davies_generator(build_ising(3, J=0.0), 0.0)
    E = conditional_expectation(gen, [1])
    rho = random_density(8, rng)
    idx = SiteIndexing(3)
    rest = partial_trace(rho, [0, 2], idx)
    # kron order (site2, site1, site0)
    expected = np.einsum("acbd,ef->aecbfd", rest.reshape(2, 2, 2, 2), np.eye(2) / 2).reshape(8, 8)
    assert np.allclose(E(rho), expected)


def test_infinite_temperature_sites_commute():
    gen = generator("ising", 4, 0.0)
    e0, e2 = conditional_expectation(gen, [0]), conditional_expectation(gen, [2])
    assert (e0.op @ e2.op - e2.op @ e0.op).kms_norm() <= 1e-12


def test_depolarizer_semigroup_limit():
    gen = davies_generator(Z, 0.0)
    E = conditional_expectation(gen)
    rep = semigroup_limit_check(gen, E, [0.5, 1.0, 2.0, 4.0])
    assert rep.monotone
    slopes = np.diff(np.log(rep.residuals)) / np.diff(rep.times)
    assert np.allclose(slopes, -2.0, atol=1e-8)


def test_zero_generator_has_identity_expectation():
    gen = davies_generator(build_ising(2), 1.0, jumps=[])
    E = conditional_expectation(gen)
    assert np.allclose(E.to_superoperator().matrix, np.eye(16))
    assert E.idempotence_residual() == 0.0


def test_ambiguous_kernel_threshold():
    gen = davies_generator(Z, 0.0)
    with pytest.raises(KernelAmbiguityError):
        conditional_expectation(gen, tol=0.5)


def test_single_site_region_is_exact():
    rep = detectability(generator("cluster", 4, 1.0), [1])
    assert rep.lam <= 1e-12 and rep.k_star == 1


def test_decoupled_sites_detect_in_one_step():
    gen = davies_generator(build_ising(4, J=0.0), 0.0)
    rep = detectability(gen, [0, 1, 2])
    assert rep.lam <= 1e-12


@pytest.mark.parametrize("model,beta", [("ising", 1.0), ("cluster", 1.0)])
def test_detectability_decay(model, beta):
    gen = generator(model, 4, beta)
    rep = detectability(gen, [0, 1, 2], k_max=12)
    assert 0 < rep.lam < 1 and rep.passed and rep.monotone
    for k, d in enumerate(rep.decay, start=1):
        assert d <= rep.lam**k + 1e-10
    rev = detectability(gen, [0, 1, 2], k_max=3, order="descending")
    assert rev.order == (2, 1, 0)
    assert rev.lam == pytest.approx(rep.lam, abs=1e-10)
    d = json.loads(rep.to_json())
    assert d["lambda"] == rep.lam and d["region"] == [0, 1, 2] and d["passed"] is True


def test_sites_must_enumerate_region():
    gen = generator("ising", 3, 1.0)
    E_X = conditional_expectation(gen, [0, 1])
    with pytest.raises(ValueError):
        product_expectation_distance([conditional_expectation(gen, [0])], E_X)
    with pytest.raises(ValueError):
        product_expectation_distance([], E_X)
