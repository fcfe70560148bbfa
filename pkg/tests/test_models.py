import numpy as np
import pytest

from daviesmix.models import (NonCommutingError, block_mps, build_cluster, build_custom, build_ising, check_commuting,
                              cluster_mps_state, cluster_tensor, cyclic_shift, from_config, pauli_sum,
                              trivial_representation, z2z2_representation)
from daviesmix.states import pauli_string, task_seed
from daviesmix.tensor import SiteIndexing, embed_local, op_norm


def test_ising_energies_are_classical():
    h = build_ising(4, "periodic", J=1.0, h_z=0.3)
    diag = np.real(np.diag(h.total))
    for i in range(16):
        s = [1 - 2 * ((i >> k) & 1) for k in range(4)]
        e = -sum(s[k] * s[(k + 1) % 4] for k in range(4)) - 0.3 * sum(s)
        assert diag[i] == pytest.approx(e)
    assert np.allclose(h.total, np.diag(diag))


def test_open_chain_has_fewer_bonds():
    assert len(build_ising(5, "open").terms) == 4
    assert len(build_ising(5, "periodic").terms) == 5


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_cluster_terms_commute_and_translate(n):
    h = build_cluster(n)
    ok, worst = check_commuting(h)
    assert ok and worst <= 1e-12
    u = cyclic_shift(n)
    assert op_norm(u @ h.total @ u.conj().T - h.total) <= 1e-12


def test_cluster_ground_energy():
    for n in (4, 5, 6):
        assert np.linalg.eigvalsh(build_cluster(n).total)[0] == pytest.approx(-n)


def test_non_commuting_custom_rejected():
    with pytest.raises(NonCommutingError):
        build_custom(3, "periodic", pauli_sum("XX + ZI"), 2, commutation_check=True)
    build_custom(3, "periodic", pauli_sum("XX + ZI"), 2, commutation_check=False)


def test_from_config_round_trip():
    h = from_config({"model": "custom", "n": 3, "boundary": "open", "params": {"local_term": "-1*ZZ"}})
    assert np.allclose(h.total, build_ising(3, "open").total)
    with pytest.raises(ValueError):
        from_config({"model": "heisenberg", "n": 3})


@pytest.mark.parametrize("expr,expected", [
    ("ZZ", pauli_string("ZZ")),
    ("-ZZ + 0.5*XI", -pauli_string("ZZ") + 0.5 * pauli_string("XI")),
    ("1e-3*ZZ - 2.5e+1 YY", 1e-3 * pauli_string("ZZ") - 25 * pauli_string("YY")),
])
def test_pauli_sum(expr, expected):
    assert np.allclose(pauli_sum(expr), expected)


@pytest.mark.parametrize("bad", ["", "ZZ XX", "2*QQ"])
def test_pauli_sum_rejects(bad):
    with pytest.raises(ValueError):
        pauli_sum(bad)


def test_cluster_mps_blocking_is_injective():
    t = cluster_tensor()
    assert not t.is_injective()
    b = block_mps(t, 2)
    assert b.is_injective()


@pytest.mark.parametrize("n", [3, 4, 6])
def test_cluster_mps_is_stabilizer_state(n):
    psi = cluster_mps_state(n)
    idx = SiteIndexing(n)
    for j in range(n):
        g = embed_local(pauli_string("ZXZ"), [(j - 1) % n, j, (j + 1) % n], idx)
        assert np.allclose(g @ psi, psi)


@pytest.mark.parametrize("n", [4, 6])
def test_z2z2_symmetry(n):
    rep = z2z2_representation(n)
    assert rep.closure_residual() <= 1e-14
    h = build_cluster(n).total
    for g in rep.labels:
        assert op_norm(rep[g] @ h - h @ rep[g]) <= 1e-12


def test_z2z2_needs_even_n():
    with pytest.raises(ValueError):
        z2z2_representation(5)


def test_trivial_representation():
    rep = trivial_representation(2, 1j)
    assert rep.closure_residual() <= 1e-14
    assert np.allclose(rep["g"], 1j * np.eye(4))


def test_task_seed_is_stable_and_distinct():
    assert task_seed(1, 2) == task_seed(1, 2)
    assert len({task_seed(1, k) for k in range(50)}) == 50
