"""Pauli matrices and seeded random states."""
from __future__ import annotations

import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"I": I2, "X": X, "Y": Y, "Z": Z}


def pauli_string(label: str) -> np.ndarray:
    """Kron product of single-qubit Paulis, e.g. ``"ZXZ"`` (left factor first)."""
    out = np.ones((1, 1), dtype=complex)
    for ch in label.upper():
        out = np.kron(out, PAULI[ch])
    return out


def rng_from(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def task_seed(base_seed: int, task_index: int) -> int:
    """Deterministic per-task seed, independent of scheduling order."""
    return int(np.random.SeedSequence([int(base_seed), int(task_index)]).generate_state(1)[0])


def haar_pure(dim: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def pure_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def random_density(dim: int, rng, rank: int | None = None) -> np.ndarray:
    """Ginibre-distributed density matrix of the given rank (full rank by default)."""
    rng = rng_from(rng)
    k = dim if rank is None else rank
    g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_hermitian(dim: int, rng) -> np.ndarray:
    rng = rng_from(rng)
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (g + g.conj().T) / 2


def basis_density(dim: int, k: int) -> np.ndarray:
    rho = np.zeros((dim, dim), dtype=complex)
    rho[k, k] = 1.0
    return rho
