"""Bohr-sector block representation of Davies-type superoperators.

Let ``H = V diag(E) V^dagger``.  A Davies generator commutes with
``X -> [H, X]``, so in the energy basis it only couples matrix elements
``X_ij`` and ``X_kl`` with the same Bohr frequency ``E_i - E_j = E_k - E_l``.
Every superoperator derived from it (restrictions, conditional expectations,
semigroup elements, products of those) inherits this block structure, which
is what makes n = 6 chains (4096 x 4096 superoperators) tractable: the
largest block of the 6-site Ising chain has 1808 rows.

Blocks act on energy-basis matrix elements ``X~[i_p, j_p]`` of a sector.
The KMS similarity ``X -> sigma^{1/4} X sigma^{1/4}`` is diagonal there with
weights ``(p_i p_j)^{1/4}``; ``symmetrized`` blocks are
``diag(w)^-1 B diag(w)`` and are Hermitian exactly when the map is
self-adjoint for the KMS inner product.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import eigh

from .tensor import SuperOperator, herm_eig, real_if_close

TOL_KERNEL = 1e-8


class KernelAmbiguityError(RuntimeError):
    """Eigenvalues sit too close to the kernel threshold to separate them."""


class NonErgodicError(RuntimeError):
    pass


def group_values(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Cluster sorted-able reals within ``tol``; return (labels, cluster means)."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    labels = np.empty(values.size, dtype=int)
    means = []
    start = 0
    cur = 0
    for k in range(1, values.size + 1):
        if k == values.size or values[order[k]] - values[order[k - 1]] > tol:
            chunk = order[start:k]
            labels[chunk] = cur
            means.append(values[chunk].mean())
            cur += 1
            start = k
    return labels, np.array(means)


@dataclass(frozen=True)
class Sector:
    nu: float
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.rows.size


class SectorStructure:
    """Energy basis, Bohr sectors and Gibbs weights for one (H, beta)."""

    def __init__(self, h: np.ndarray, beta: float, tol_omega: float | None = None):
        h = np.asarray(h, dtype=complex)
        evals, vecs = herm_eig(h)
        scale = max(1.0, float(np.max(np.abs(evals), initial=0.0)))
        self.tol_omega = 1e-9 * scale if tol_omega is None else tol_omega
        self.level, levels = group_values(evals, self.tol_omega)
        self.energies = levels[self.level]
        self.vecs = vecs
        self.dim = h.shape[0]
        self.beta = float(beta)
        shifted = -self.beta * (self.energies - self.energies.min())
        boltz = np.exp(shifted)
        self.log_partition = float(np.log(boltz.sum()) - self.beta * self.energies.min())
        self.populations = boltz / boltz.sum()

        d = self.dim
        ii, jj = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
        nu = (self.energies[:, None] - self.energies[None, :]).ravel()
        lab, means = group_values(nu, self.tol_omega)
        ii, jj = ii.ravel(), jj.ravel()
        q = np.sqrt(np.sqrt(self.populations))
        self.sectors: list[Sector] = []
        for k, m in enumerate(means):
            sel = np.flatnonzero(lab == k)
            rows, cols = ii[sel], jj[sel]
            self.sectors.append(Sector(float(m), rows, cols, q[rows] * q[cols]))

    @property
    def sigma(self) -> np.ndarray:
        return (self.vecs * self.populations) @ self.vecs.conj().T

    def to_energy(self, x) -> np.ndarray:
        return self.vecs.conj().T @ np.asarray(x) @ self.vecs

    def from_energy(self, x) -> np.ndarray:
        return self.vecs @ x @ self.vecs.conj().T

    def same_level(self) -> np.ndarray:
        return self.level[:, None] == self.level[None, :]


def _spectral_norm(m: np.ndarray) -> float:
    if m.shape[0] < 200:
        return float(np.linalg.norm(m, 2))
    # largest eigenvalue of m^+ m only; much cheaper than a full SVD
    g = m.conj().T @ m
    top = eigh(g, eigvals_only=True, subset_by_index=[g.shape[0] - 1, g.shape[0] - 1])
    return float(np.sqrt(max(top[0], 0.0)))


class SectorOperator:
    """Block-diagonal superoperator over the Bohr sectors of a structure.

    Blocks are stored in the KMS frame (``sym``); Schrodinger-picture blocks
    are derived on demand.  Composition, sums and powers commute with the
    similarity, so all algebra happens in the KMS frame.
    """

    def __init__(self, structure: SectorStructure, sym: list[np.ndarray]):
        if len(sym) != len(structure.sectors):
            raise ValueError("one block per sector required")
        self.structure = structure
        self.sym = [real_if_close(np.asarray(m)) for m in sym]

    # -- construction ------------------------------------------------------

    @classmethod
    def identity(cls, structure: SectorStructure) -> "SectorOperator":
        return cls(structure, [np.eye(s.size, dtype=complex) for s in structure.sectors])

    @classmethod
    def zero(cls, structure: SectorStructure) -> "SectorOperator":
        return cls(structure, [np.zeros((s.size, s.size), dtype=complex) for s in structure.sectors])

    @classmethod
    def from_schrodinger(cls, structure: SectorStructure, blocks: list[np.ndarray]) -> "SectorOperator":
        sym = [m * (s.weights[None, :] / s.weights[:, None]) for s, m in zip(structure.sectors, blocks)]
        return cls(structure, sym)

    @cached_property
    def blocks(self) -> list[np.ndarray]:
        """Schrodinger-picture blocks ``diag(w) M diag(w)^-1``."""
        return [m * (s.weights[:, None] / s.weights[None, :]) for s, m in zip(self.structure.sectors, self.sym)]

    # -- algebra -----------------------------------------------------------

    def _check(self, other: "SectorOperator"):
        if other.structure is not self.structure:
            raise ValueError("operators live on different sector structures")

    def __add__(self, other):
        self._check(other)
        return SectorOperator(self.structure, [a + b for a, b in zip(self.sym, other.sym)])

    def __sub__(self, other):
        self._check(other)
        return SectorOperator(self.structure, [a - b for a, b in zip(self.sym, other.sym)])

    def __mul__(self, c):
        return SectorOperator(self.structure, [c * a for a in self.sym])

    __rmul__ = __mul__

    def __matmul__(self, other: "SectorOperator") -> "SectorOperator":
        """Composition ``self o other`` (other applied first)."""
        self._check(other)
        return SectorOperator(self.structure, [a @ b for a, b in zip(self.sym, other.sym)])

    def power(self, k: int) -> "SectorOperator":
        return SectorOperator(self.structure, [np.linalg.matrix_power(a, k) for a in self.sym])

    def kms_adjoint(self) -> "SectorOperator":
        """Adjoint for the KMS inner product."""
        return SectorOperator(self.structure, [a.conj().T for a in self.sym])

    # -- action ------------------------------------------------------------

    def apply_energy(self, xe: np.ndarray) -> np.ndarray:
        out = np.zeros_like(xe, dtype=complex)
        for s, m in zip(self.structure.sectors, self.sym):
            out[s.rows, s.cols] = s.weights * (m @ (xe[s.rows, s.cols] / s.weights))
        return out

    def __call__(self, x) -> np.ndarray:
        st = self.structure
        return st.from_energy(self.apply_energy(st.to_energy(x)))

    def to_superoperator(self) -> SuperOperator:
        """Dense computational-basis matrix (column stacking)."""
        st = self.structure
        d = st.dim
        m = np.zeros((d * d, d * d), dtype=complex)
        for s, b in zip(st.sectors, self.blocks):
            flat = s.rows + d * s.cols
            m[np.ix_(flat, flat)] = b
        w = np.kron(st.vecs.conj(), st.vecs)
        return SuperOperator(w @ m @ w.conj().T)

    # -- KMS frame ---------------------------------------------------------

    def hermiticity_residual(self) -> float:
        """``|| M - M^dagger ||_inf`` of the KMS-symmetrized map."""
        worst = 0.0
        for m in self.sym:
            a = m - m.conj().T
            if not a.size or not np.any(a):
                continue
            worst = max(worst, float(np.max(np.abs(np.linalg.eigvalsh(1j * a)))))
        return worst

    def kms_norm(self) -> float:
        """Operator norm on the KMS L2 space."""
        worst = 0.0
        for m in self.sym:
            if m.size and np.any(m):
                worst = max(worst, _spectral_norm(m))
        return worst

    @cached_property
    def spectrum(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Per-sector eigenpairs of the Hermitian part of the KMS-frame blocks."""
        return [herm_eig((m + m.conj().T) / 2) for m in self.sym]

    def eigenvalues(self) -> np.ndarray:
        if not self.sym:
            return np.zeros(0)
        return np.concatenate([w for w, _ in self.spectrum])

    def kernel_dim(self, tol: float = TOL_KERNEL) -> int:
        return int(np.count_nonzero(np.abs(self.eigenvalues()) < tol))

    def kernel_projection(self, tol: float = TOL_KERNEL, margin: float = 100.0) -> "SectorOperator":
        """KMS-orthogonal projection onto the kernel of a self-adjoint generator."""
        ev = np.abs(self.eigenvalues())
        near = ev[(ev >= tol) & (ev < margin * tol)]
        if near.size:
            raise KernelAmbiguityError(
                f"eigenvalues {np.sort(near)[:5]} lie within a factor {margin} of the kernel threshold {tol}"
            )
        sym = []
        for w, v in self.spectrum:
            k = v[:, np.abs(w) < tol]
            sym.append(k @ k.conj().T)
        return SectorOperator(self.structure, sym)

    def exp(self, t: float) -> "SectorOperator":
        """``exp(t L)`` through the symmetrized eigendecomposition."""
        return SectorOperator(self.structure, [(v * np.exp(t * w)) @ v.conj().T for w, v in self.spectrum])

    def evolve(self, x, t: float) -> np.ndarray:
        """``exp(t L)(x)`` without forming the propagator."""
        st = self.structure
        xe = st.to_energy(x)
        out = np.zeros_like(xe, dtype=complex)
        for s, (w, v) in zip(st.sectors, self.spectrum):
            y = xe[s.rows, s.cols] / s.weights
            y = v @ (np.exp(t * w) * (v.conj().T @ y))
            out[s.rows, s.cols] = s.weights * y
        return st.from_energy(out)
