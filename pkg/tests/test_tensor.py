import numpy as np
import pytest
from hypothesis import given, strategies as st

from daviesmix.states import I2, X, Y, Z, random_density, random_hermitian
from daviesmix.tensor import (SiteIndexing, SuperOperator, devectorize, embed_local, floor_eigenvalues, kron,
                              logm_h, mat_func, op_norm, partial_trace, powm_h, product_operator,
                              real_if_close, schatten_norm, sprepost, trace_norm, vectorize)

seeds = st.integers(0, 2**32 - 1)


def test_site_zero_is_fastest_digit():
    idx = SiteIndexing(2)
    assert np.allclose(embed_local(Z, [0], idx), np.kron(I2, Z))
    assert np.allclose(embed_local(Z, [1], idx), np.kron(Z, I2))


def test_embed_respects_listed_order():
    idx = SiteIndexing(3)
    # op read as kron(o_2, o_0): X on site 2, Z on site 0
    got = embed_local(np.kron(X, Z), [2, 0], idx)
    assert np.allclose(got, kron(X, I2, Z))


def test_embed_rejects_bad_sites():
    idx = SiteIndexing(3)
    with pytest.raises(ValueError):
        embed_local(Z, [3], idx)
    with pytest.raises(ValueError):
        embed_local(np.kron(Z, Z), [1, 1], idx)
    with pytest.raises(ValueError):
        embed_local(Z, [0, 1], idx)


@given(seeds)
def test_partial_trace_of_product(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (random_density(2, rng) for _ in range(3))
    rho = kron(c, b, a)  # sites 2, 1, 0
    idx = SiteIndexing(3)
    assert np.allclose(partial_trace(rho, [0], idx), a)
    assert np.allclose(partial_trace(rho, [2], idx), c)
    assert np.allclose(partial_trace(rho, [0, 2], idx), np.kron(c, a))
    assert np.allclose(partial_trace(rho, [], idx), [[1.0]])


@given(seeds)
def test_partial_trace_matches_reshape_oracle(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(8, rng)
    # kron order (site2, site1, site0); trace out site 1
    t = rho.reshape(2, 2, 2, 2, 2, 2)
    oracle = np.einsum("aibcid->abcd", t).reshape(4, 4)
    assert np.allclose(partial_trace(rho, [0, 2], SiteIndexing(3)), oracle)


def test_product_operator_identity_elsewhere():
    idx = SiteIndexing(3)
    got = product_operator([(X, [1])], idx)
    assert np.allclose(got, kron(I2, X, I2))
    assert np.allclose(product_operator([], idx), np.eye(8))


@given(seeds)
def test_vectorization_identity(seed):
    rng = np.random.default_rng(seed)
    l, x, r = (rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(sprepost(l, r) @ vectorize(x), vectorize(l @ x @ r))
    assert np.allclose(devectorize(vectorize(x)), x)


def test_superoperator_algebra_and_choi():
    ident = SuperOperator.identity(2)
    flip = SuperOperator.from_map(lambda m: X @ m @ X, 2)
    rho = np.array([[0.8, 0.1], [0.1, 0.2]])
    assert np.allclose((flip @ flip)(rho), rho)
    assert np.allclose((2 * ident - ident)(rho), rho)
    omega = np.eye(2).reshape(-1)
    assert np.allclose(ident.choi(), np.outer(omega, omega))
    assert np.allclose(flip.adjoint().matrix, flip.matrix.conj().T)


def test_eigen_floor_counts_hits():
    w, hits = floor_eigenvalues(np.array([0.0, 1e-20, 0.5, 1.0]))
    assert hits == 2
    assert np.all(w > 0)


@given(seeds)
def test_matrix_functions(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(4, rng)
    assert np.allclose(powm_h(rho, 0.5) @ powm_h(rho, 0.5), rho)
    assert np.allclose(mat_func(logm_h(rho), np.exp), rho)


@given(seeds)
def test_norms_match_numpy(seed):
    rng = np.random.default_rng(seed)
    h = random_hermitian(4, rng)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert trace_norm(h) == pytest.approx(np.abs(np.linalg.eigvalsh(h)).sum())
    assert trace_norm(a) == pytest.approx(np.linalg.norm(a, "nuc"))
    assert op_norm(a) == pytest.approx(np.linalg.norm(a, 2))
    assert schatten_norm(a, 2) == pytest.approx(np.linalg.norm(a, "fro"))


def test_real_if_close():
    assert not np.iscomplexobj(real_if_close(np.eye(2) + 1e-18j))
    assert np.iscomplexobj(real_if_close(Y))
