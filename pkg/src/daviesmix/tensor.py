"""Dense linear algebra on qudit chains.

Conventions used by every other module:

* Site ordering is little-endian: in the computational basis index
  ``i = sum_s b_s * d**pos(s)`` site 0 is the fastest-varying digit.  For the
  default ordering ``pos(s) = s``, so an operator ``O_0`` on site 0 of a
  two-site chain has matrix ``np.kron(I, O_0)``.
* Operators are vectorized by stacking columns (Fortran order).  With this
  convention ``vec(L X R) = (R^T kron L) vec(X)``.
* Logarithms are natural; negative powers and logarithms use an eigenvalue
  floor of ``EIG_FLOOR`` relative to the largest eigenvalue.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Iterable, Sequence

import numpy as np

TOL_HERM = 1e-12
EIG_FLOOR = 1e-14


class EigenDecompositionError(RuntimeError):
    """Raised when the Hermitian eigensolver fails to converge."""


@dataclass(frozen=True)
class SiteIndexing:
    """Map between chain sites and tensor legs.

    ``ordering[s]`` is the digit position of site ``s`` in the basis index
    (0 = least significant).  The default is the identity map.
    """

    n_sites: int
    local_dim: int = 2
    ordering: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.n_sites < 0 or self.local_dim < 1:
            raise ValueError("n_sites must be >= 0 and local_dim >= 1")
        if self.ordering is None:
            object.__setattr__(self, "ordering", tuple(range(self.n_sites)))
        if sorted(self.ordering) != list(range(self.n_sites)):
            raise ValueError(f"ordering {self.ordering} is not a permutation")

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    def leg_order(self) -> list[int]:
        """Sites in kron-factor order (slowest digit first)."""
        return sorted(range(self.n_sites), key=lambda s: -self.ordering[s])

    def check_sites(self, sites: Iterable[int]) -> list[int]:
        sites = [int(s) for s in sites]
        for s in sites:
            if not 0 <= s < self.n_sites:
                raise ValueError(f"site {s} out of range for n={self.n_sites}")
        if len(set(sites)) != len(sites):
            raise ValueError(f"sites {sites} are not distinct")
        return sites

    def restrict(self, keep: Iterable[int]) -> tuple["SiteIndexing", list[int]]:
        """Indexing of the sub-chain ``keep`` and its site labels.

        Kept sites are relabelled 0..k-1 in ascending order; their relative
        digit order is inherited from this indexing.
        """
        keep = sorted(self.check_sites(keep))
        rank = {s: r for r, s in enumerate(sorted(keep, key=lambda s: self.ordering[s]))}
        return SiteIndexing(len(keep), self.local_dim, tuple(rank[s] for s in keep)), keep


def qubits(n: int) -> SiteIndexing:
    return SiteIndexing(n, 2)


# --------------------------------------------------------------------------
# validation
# --------------------------------------------------------------------------

def is_hermitian(a: np.ndarray, tol: float = TOL_HERM) -> bool:
    a = np.asarray(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * scale)


def hermitian(a, tol: float = TOL_HERM) -> np.ndarray:
    """Return ``a`` as a complex array after checking Hermiticity."""
    a = np.asarray(a, dtype=complex)
    if not is_hermitian(a, tol):
        raise ValueError("operator is not Hermitian within tolerance")
    return a


def density_matrix(rho, tol: float = 1e-12) -> np.ndarray:
    """Validate a density matrix: Hermitian, unit trace, eigenvalues >= -tol."""
    rho = hermitian(rho)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"trace {tr!r} differs from 1")
    lo = np.linalg.eigvalsh(rho)[0]
    if lo < -tol:
        raise ValueError(f"negative eigenvalue {lo:.3e}")
    return rho


# --------------------------------------------------------------------------
# tensor products and site placement
# --------------------------------------------------------------------------

def kron(*mats) -> np.ndarray:
    """Kronecker product of any number of matrices (left factor is slowest)."""
    if not mats:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, mats)


def _permute_legs(op: np.ndarray, current: Sequence[int], target: Sequence[int], d: int) -> np.ndarray:
    """Reorder the tensor factors of ``op`` from kron order ``current`` to ``target``."""
    n = len(current)
    if list(current) == list(target):
        return op
    pos = {s: k for k, s in enumerate(current)}
    perm = [pos[s] for s in target]
    t = op.reshape((d,) * (2 * n))
    t = t.transpose(perm + [n + p for p in perm])
    return t.reshape(d**n, d**n)


def embed_local(op, sites: Sequence[int], idx: SiteIndexing) -> np.ndarray:
    """Place ``op`` on ``sites`` with identities elsewhere.

    ``op`` is read as ``kron(o_{sites[0]}, o_{sites[1]}, ...)``; sites may be
    listed in any order, e.g. ``[n-1, 0, 1]`` for a term wrapping the
    periodic boundary.
    """
    op = np.asarray(op, dtype=complex)
    sites = idx.check_sites(sites)
    d = idx.local_dim
    k = len(sites)
    if op.shape != (d**k, d**k):
        raise ValueError(f"operator shape {op.shape} does not match {k} sites of dimension {d}")
    rest = [s for s in range(idx.n_sites) if s not in sites]
    full = np.kron(op, np.eye(d ** len(rest), dtype=complex))
    return _permute_legs(full, sites + rest, idx.leg_order(), d)


def product_operator(factors: Sequence[tuple[np.ndarray, Sequence[int]]], idx: SiteIndexing) -> np.ndarray:
    """Tensor product of operators on disjoint site groups.

    Sites not covered by any factor carry the identity.
    """
    ops, order = [], []
    for op, sites in factors:
        ops.append(np.asarray(op, dtype=complex))
        order.extend(int(s) for s in sites)
    return embed_local(kron(*ops), order, idx) if order else np.eye(idx.dim, dtype=complex)


def partial_trace(rho, keep: Iterable[int], idx: SiteIndexing) -> np.ndarray:
    """Trace out every site not in ``keep``.

    The result lives on ``idx.restrict(keep)``: kept sites relabelled in
    ascending order.  Keeping no site returns the 1x1 matrix ``[[tr rho]]``.
    """
    rho = np.asarray(rho)
    sub, keep = idx.restrict(keep)
    n, d = idx.n_sites, idx.local_dim
    legs = idx.leg_order()
    axes_keep = [legs.index(s) for s in sub_leg_sites(sub, keep)]
    axes_out = [a for a in range(n) if a not in axes_keep]
    dk, dr = d ** len(axes_keep), d ** len(axes_out)
    t = rho.reshape((d,) * (2 * n))
    t = t.transpose(axes_keep + axes_out + [n + a for a in axes_keep] + [n + a for a in axes_out])
    return np.einsum("ajbj->ab", t.reshape(dk, dr, dk, dr))


def sub_leg_sites(sub: SiteIndexing, labels: Sequence[int]) -> list[int]:
    """Original site labels of a restricted indexing, in its kron order."""
    return [labels[s] for s in sub.leg_order()]


# --------------------------------------------------------------------------
# spectral calculus
# --------------------------------------------------------------------------

def real_if_close(a: np.ndarray, tol: float = 1e-14) -> np.ndarray:
    """Drop an imaginary part that is below ``tol`` relative to the largest entry."""
    if not np.iscomplexobj(a) or not a.size:
        return a
    scale = max(1.0, float(np.max(np.abs(a))))
    if float(np.max(np.abs(a.imag))) <= tol * scale:
        return np.ascontiguousarray(a.real)
    return a


def herm_eig(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and unitary eigenvectors of a Hermitian matrix.

    Matrices that are real up to rounding go through the (faster) real solver.
    """
    a = real_if_close(np.asarray(a))
    try:
        return np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionError(
            f"eigh failed to converge (dim={a.shape[0]}, norm={np.linalg.norm(a):.3e})"
        ) from exc


def floor_eigenvalues(w: np.ndarray, floor: float = EIG_FLOOR) -> tuple[np.ndarray, int]:
    """Clip eigenvalues at ``floor * max(w)``; return clipped values and hit count."""
    w = np.asarray(w, dtype=float)
    cut = floor * max(float(np.max(w, initial=0.0)), np.finfo(float).tiny)
    hits = int(np.count_nonzero(w < cut))
    return np.maximum(w, cut), hits


def mat_func(a, f: Callable[[np.ndarray], np.ndarray], floor: bool = False) -> np.ndarray:
    """Apply the scalar function ``f`` to a Hermitian matrix via its spectrum.

    With ``floor=True`` the eigenvalues are first clipped at the relative
    floor, as needed for logarithms and negative powers of states.
    """
    w, v = herm_eig(a)
    if floor:
        w, _ = floor_eigenvalues(w)
    fw = np.asarray(f(w))
    if not np.all(np.isfinite(fw)):
        raise ValueError("function is undefined on the spectrum")
    return (v * fw) @ v.conj().T


def logm_h(a, floor: bool = True) -> np.ndarray:
    return mat_func(a, np.log, floor=floor)


def powm_h(a, p: float) -> np.ndarray:
    return mat_func(a, lambda w: w**p, floor=p < 0)


def expm_h(a) -> np.ndarray:
    return mat_func(a, np.exp)


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------

def schatten_norm(a, p=1) -> float:
    """Schatten p-norm for p in {1, 2, inf}."""
    a = np.asarray(a)
    if p == 2:
        return float(np.sqrt(np.sum(np.abs(a) ** 2)))
    if is_hermitian(a, 1e-13):
        s = np.abs(np.linalg.eigvalsh(a))
    else:
        s = np.linalg.svd(a, compute_uv=False)
    if p == 1:
        return float(np.sum(s))
    if p in (np.inf, "inf", "infinity"):
        return float(np.max(s, initial=0.0))
    raise ValueError(f"unsupported Schatten index {p!r}")


def trace_norm(a) -> float:
    return schatten_norm(a, 1)


def op_norm(a) -> float:
    return schatten_norm(a, np.inf)


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


# --------------------------------------------------------------------------
# vectorization and superoperators
# --------------------------------------------------------------------------

def vectorize(x) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def devectorize(v, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    if dim * dim != v.size:
        raise ValueError(f"vector of length {v.size} is not a {dim}x{dim} operator")
    return v.reshape(dim, dim, order="F")


def sprepost(left, right) -> np.ndarray:
    """Matrix of ``X -> left @ X @ right``."""
    return np.kron(np.asarray(right).T, np.asarray(left))


def superop_from_leftright(left, right) -> np.ndarray:
    """Matrix of ``X -> left @ X @ right^dagger``."""
    return np.kron(np.asarray(right).conj(), np.asarray(left))


@dataclass(frozen=True)
class SuperOperator:
    """Linear map on ``dim x dim`` operators, stored as a column-stacking matrix."""

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        dim = int(round(np.sqrt(m.shape[0])))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or dim * dim != m.shape[0]:
            raise ValueError(f"shape {m.shape} is not a superoperator shape")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    @classmethod
    def identity(cls, dim: int) -> "SuperOperator":
        return cls(np.eye(dim * dim, dtype=complex))

    @classmethod
    def zero(cls, dim: int) -> "SuperOperator":
        return cls(np.zeros((dim * dim, dim * dim), dtype=complex))

    @classmethod
    def from_map(cls, f: Callable[[np.ndarray], np.ndarray], dim: int) -> "SuperOperator":
        """Tabulate a linear map by its action on matrix units."""
        m = np.empty((dim * dim, dim * dim), dtype=complex)
        for k in range(dim * dim):
            e = np.zeros(dim * dim, dtype=complex)
            e[k] = 1.0
            m[:, k] = vectorize(f(devectorize(e, dim)))
        return cls(m)

    def __call__(self, x) -> np.ndarray:
        return devectorize(self.matrix @ vectorize(x), self.dim)

    def __matmul__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix @ other.matrix)

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix + other.matrix)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.matrix - other.matrix)

    def __mul__(self, c) -> "SuperOperator":
        return SuperOperator(c * self.matrix)

    __rmul__ = __mul__

    def adjoint(self) -> "SuperOperator":
        """Adjoint under the Hilbert-Schmidt pairing (Heisenberg picture)."""
        return SuperOperator(self.matrix.conj().T)

    def choi(self) -> np.ndarray:
        """Choi matrix ``sum_ij |i><j| kron T(|i><j|)``."""
        d = self.dim
        c = np.zeros((d * d, d * d), dtype=complex)
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                e[i, j] = 1.0
                c += np.kron(e, self(e))
        return c
