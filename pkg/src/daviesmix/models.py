"""Translation-invariant commuting chain Hamiltonians, the cluster MPS and
the Z2 x Z2 symmetry of the cluster chain.

Hamiltonians carry an overall minus sign on their coupling/stabilizer terms
so that ground states are the physically named states (the cluster state is
the ground state of ``-sum_j Z_{j-1} X_j Z_{j+1}``).  A periodic chain of two
sites keeps both wrapped copies of the single bond.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .states import I2, X, Z, pauli_string
from .tensor import SiteIndexing, commutator, embed_local, hermitian, op_norm

TOL_COMMUTE = 1e-12


class NonCommutingError(ValueError):
    pass


@dataclass(frozen=True)
class LocalTerm:
    sites: tuple[int, ...]
    op: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ChainHamiltonian:
    n: int
    range: int
    local_term: np.ndarray = field(repr=False)
    boundary: str
    local_terms: tuple[LocalTerm, ...] = field(repr=False)
    model: str = "custom"
    params: dict = field(default_factory=dict)

    @cached_property
    def indexing(self) -> SiteIndexing:
        return SiteIndexing(self.n, 2)

    @cached_property
    def terms(self) -> list[np.ndarray]:
        return [embed_local(t.op, t.sites, self.indexing) for t in self.local_terms]

    @cached_property
    def total(self) -> np.ndarray:
        h = np.zeros((self.indexing.dim,) * 2, dtype=complex)
        for t in self.terms:
            h += t
        return h

    @cached_property
    def commutation(self) -> tuple[bool, float]:
        return check_commuting(self)

    @property
    def commuting(self) -> bool:
        return self.commutation[0]

    def to_config(self) -> dict:
        return {"model": self.model, "n": self.n, "boundary": self.boundary, "params": dict(self.params)}


def _wrap_sites(start: int, length: int, n: int, boundary: str) -> list[tuple[int, ...]] | None:
    sites = [start + k for k in range(length)]
    if boundary == "open":
        return tuple(sites) if sites[-1] < n else None
    return tuple(s % n for s in sites)


def _placements(n: int, r: int, boundary: str) -> list[tuple[int, ...]]:
    if boundary not in ("periodic", "open"):
        raise ValueError(f"unknown boundary {boundary!r}")
    starts = range(n) if boundary == "periodic" else range(n - r + 1)
    return [_wrap_sites(j, r, n, boundary) for j in starts]


def check_commuting(h: ChainHamiltonian, tol: float = TOL_COMMUTE) -> tuple[bool, float]:
    """Largest ``||[h_i, h_j]||_inf`` over term pairs and whether it is <= tol.

    Terms with disjoint supports commute exactly; overlapping pairs are
    compared on the union of their supports, which has the same operator norm
    as the full embedded commutator.
    """
    worst = 0.0
    terms = h.local_terms
    for a, b in itertools.combinations(terms, 2):
        union = sorted(set(a.sites) | set(b.sites))
        if len(union) == len(a.sites) + len(b.sites) and not set(a.sites) & set(b.sites):
            continue
        sub = SiteIndexing(len(union), 2)
        pos = {s: k for k, s in enumerate(union)}
        ea = embed_local(a.op, [pos[s] for s in a.sites], sub)
        eb = embed_local(b.op, [pos[s] for s in b.sites], sub)
        worst = max(worst, op_norm(commutator(ea, eb)))
    return worst <= tol, worst


def _make(n, r, local_term, boundary, terms, model, params, require_commuting) -> ChainHamiltonian:
    h = ChainHamiltonian(n, r, local_term, boundary, tuple(terms), model, params)
    if require_commuting:
        ok, worst = h.commutation
        if not ok:
            raise NonCommutingError(f"terms do not commute: max ||[h_i,h_j]|| = {worst:.3e}")
    return h


def build_ising(n: int, boundary: str = "periodic", J: float = 1.0, h_z: float = 0.0) -> ChainHamiltonian:
    """Classical Ising chain ``-J sum Z_i Z_{i+1} - h_z sum Z_i``."""
    if n < 2:
        raise ValueError("Ising chain needs n >= 2")
    zz = -J * np.kron(Z, Z)
    terms = [LocalTerm(s, zz) for s in _placements(n, 2, boundary)]
    if h_z != 0.0:
        terms += [LocalTerm((s,), -h_z * Z) for s in range(n)]
    local = zz - h_z * np.kron(Z, I2)
    return _make(n, 2, local, boundary, terms, "ising", {"J": J, "h_z": h_z}, True)


def build_cluster(n: int, boundary: str = "periodic") -> ChainHamiltonian:
    """Cluster chain ``-sum_j Z_{j-1} X_j Z_{j+1}``."""
    if n < 3:
        raise ValueError("cluster chain needs n >= 3")
    zxz = -pauli_string("ZXZ")
    terms = [LocalTerm(s, zxz) for s in _placements(n, 3, boundary)]
    return _make(n, 3, zxz, boundary, terms, "cluster", {}, True)


def build_custom(n: int, boundary: str, local_term, range: int, commutation_check: bool = False) -> ChainHamiltonian:
    """Translation-invariant chain from an ``2^range x 2^range`` Hermitian term."""
    local_term = hermitian(local_term)
    if local_term.shape != (2**range, 2**range):
        raise ValueError(f"local term shape {local_term.shape} does not match range {range}")
    if n < range:
        raise ValueError("chain shorter than the interaction range")
    terms = [LocalTerm(s, local_term) for s in _placements(n, range, boundary)]
    params = {"local_term": local_term, "range": range}
    return _make(n, range, local_term, boundary, terms, "custom", params, commutation_check)


def from_config(cfg: dict) -> ChainHamiltonian:
    """Build a Hamiltonian from ``{"model", "n", "boundary", "params"}``."""
    model = cfg["model"]
    n = int(cfg["n"])
    boundary = cfg.get("boundary", "periodic")
    params = dict(cfg.get("params", {}))
    if model == "ising":
        return build_ising(n, boundary, J=float(params.get("J", 1.0)), h_z=float(params.get("h_z", 0.0)))
    if model == "cluster":
        return build_cluster(n, boundary)
    if model == "custom":
        term = params["local_term"]
        if isinstance(term, str):
            op = pauli_sum(term)
        else:
            op = np.asarray(term, dtype=complex)
        r = int(params.get("range", round(np.log2(op.shape[0]))))
        return build_custom(n, boundary, op, r, commutation_check=bool(params.get("commutation_check", False)))
    raise ValueError(f"unknown model {model!r}")


_PAULI_TERM = re.compile(
    r"\s*([+-])?\s*(?:((?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*\*?\s*)?([IXYZ]+)\s*", re.IGNORECASE)


def pauli_sum(expr: str) -> np.ndarray:
    """Parse ``"-1.0*ZZ + 0.5*XX"`` style sums of equal-length Pauli strings."""
    total, pos = None, 0
    while pos < len(expr.rstrip()):
        m = _PAULI_TERM.match(expr, pos)
        if m is None or m.end() == pos:
            raise ValueError(f"cannot parse Pauli sum {expr!r} at position {pos}")
        sign, coef, label = m.groups()
        if total is not None and sign is None:
            raise ValueError(f"missing operator between terms in {expr!r}")
        c = (-1.0 if sign == "-" else 1.0) * (float(coef) if coef else 1.0)
        op = c * pauli_string(label)
        total = op if total is None else total + op
        pos = m.end()
    if total is None:
        raise ValueError(f"empty Pauli sum {expr!r}")
    return total


def cyclic_shift(n: int) -> np.ndarray:
    """Unitary moving the state of site s to site s+1 (mod n)."""
    dim = 2**n
    u = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        bits = [(i >> s) & 1 for s in range(n)]
        j = sum(bits[(s - 1) % n] << s for s in range(n))
        u[j, i] = 1.0
    return u


# --------------------------------------------------------------------------
# matrix product states
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MPSTensor:
    """Translation-invariant MPS tensor: ``matrices[i]`` is the D x D matrix A^i."""

    matrices: np.ndarray = field(repr=False)

    @property
    def physical_dim(self) -> int:
        return self.matrices.shape[0]

    @property
    def bond_dim(self) -> int:
        return self.matrices.shape[1]

    def span_rank(self, tol: float = 1e-10) -> int:
        """Rank of the span of the A^i inside the D x D matrix algebra."""
        flat = self.matrices.reshape(self.physical_dim, -1)
        return int(np.linalg.matrix_rank(flat, tol=tol))

    def is_injective(self) -> bool:
        return self.span_rank() == self.bond_dim**2


def cluster_tensor() -> MPSTensor:
    """``A^0 = |0)(+|``, ``A^1 = |1)(-|``."""
    plus = np.array([1, 1]) / np.sqrt(2)
    minus = np.array([1, -1]) / np.sqrt(2)
    a0 = np.outer([1, 0], plus)
    a1 = np.outer([0, 1], minus)
    return MPSTensor(np.array([a0, a1], dtype=complex))


def block_mps(t: MPSTensor, k: int) -> MPSTensor:
    """Block ``k`` sites: ``A^{i_1...i_k} = A^{i_1} ... A^{i_k}`` with i_1 slowest."""
    if k < 1:
        raise ValueError("blocking factor must be >= 1")
    mats = []
    for combo in itertools.product(range(t.physical_dim), repeat=k):
        m = np.eye(t.bond_dim, dtype=complex)
        for i in combo:
            m = m @ t.matrices[i]
        mats.append(m)
    return MPSTensor(np.array(mats))


def mps_state(t: MPSTensor, n: int, normalize: bool = True) -> np.ndarray:
    """Periodic MPS ``sum tr(A^{i_0} ... A^{i_{n-1}}) |i_0 ... i_{n-1}>``.

    Amplitudes use the little-endian basis index ``sum_s i_s d^s``.
    """
    d = t.physical_dim
    psi = np.empty(d**n, dtype=complex)
    for idx in range(d**n):
        m = np.eye(t.bond_dim, dtype=complex)
        rem = idx
        for _ in range(n):
            m = m @ t.matrices[rem % d]
            rem //= d
        psi[idx] = np.trace(m)
    if normalize:
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ValueError("MPS has zero norm on this chain length")
        psi = psi / nrm
    return psi


def cluster_mps_state(n: int) -> np.ndarray:
    if n < 3:
        raise ValueError("cluster state needs n >= 3")
    return mps_state(cluster_tensor(), n)


# --------------------------------------------------------------------------
# symmetry representations
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryRep:
    labels: tuple[str, ...]
    unitaries: dict = field(repr=False)
    product: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, g: str) -> np.ndarray:
        return self.unitaries[g]

    def closure_residual(self) -> float:
        """Max ``||u_g u_h - u_{gh}||_inf`` over the multiplication table."""
        worst = 0.0
        for (g, h), gh in self.product.items():
            worst = max(worst, op_norm(self.unitaries[g] @ self.unitaries[h] - self.unitaries[gh]))
        return worst


def z2z2_representation(n: int) -> SymmetryRep:
    """On-site Z2 x Z2 of the periodic cluster chain.

    Generators flip every even site and every odd site respectively
    (``prod_{j even} X_j`` and ``prod_{j odd} X_j``); on two-site blocks these
    are ``X (x) 1`` and ``1 (x) X``.
    """
    if n % 2:
        raise ValueError("Z2 x Z2 blocking needs an even number of sites")
    idx = SiteIndexing(n, 2)
    dim = idx.dim
    x_even = np.eye(dim, dtype=complex)
    x_odd = np.eye(dim, dtype=complex)
    for s in range(n):
        if s % 2 == 0:
            x_even = x_even @ embed_local(X, [s], idx)
        else:
            x_odd = x_odd @ embed_local(X, [s], idx)
    units = {"e": np.eye(dim, dtype=complex), "a": x_even, "b": x_odd, "ab": x_even @ x_odd}
    mult = {"e": (0, 0), "a": (1, 0), "b": (0, 1), "ab": (1, 1)}
    inv = {v: k for k, v in mult.items()}
    table = {}
    for g, h in itertools.product(units, repeat=2):
        ga, gb = mult[g]
        ha, hb = mult[h]
        table[(g, h)] = inv[((ga + ha) % 2, (gb + hb) % 2)]
    return SymmetryRep(tuple(units), units, table)


def trivial_representation(n: int, phase: complex = 1.0) -> SymmetryRep:
    """Group {e, g} acting by a global phase only."""
    dim = 2**n
    units = {"e": np.eye(dim, dtype=complex), "g": phase * np.eye(dim, dtype=complex)}
    table = {("e", "e"): "e", ("e", "g"): "g", ("g", "e"): "g"}
    return SymmetryRep(("e", "g"), units, table)
