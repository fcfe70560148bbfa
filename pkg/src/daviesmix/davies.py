"""Davies generators of commuting chains.

The generator is

    L(rho) = sum_{alpha, omega} gamma(omega) [S_a(w) rho S_a(w)^+ - 1/2 {S_a(w)^+ S_a(w), rho}]

with ``S_a(w)`` the Bohr components of the jump ``S_a``:
``exp(itH) S exp(-itH) = sum_w S(w) exp(-i w t)``, so ``S(w)`` lowers the
energy by ``w``.  The Lamb-shift term commutes with ``H`` and leaves the fixed
point, gap and entropy decay untouched; it is omitted.

Jumps are anchored at a site; the part of the generator built from jumps
anchored at ``x`` is ``L_x`` and ``L_A = sum_{x in A} L_x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import expit

from .models import ChainHamiltonian, SymmetryRep
from .sectors import NonErgodicError, SectorOperator, SectorStructure, TOL_KERNEL, group_values
from .states import basis_density, haar_pure, pure_density, pauli_string, rng_from
from .tensor import SiteIndexing, SuperOperator, embed_local, herm_eig, op_norm, powm_h, trace_norm

TOL_FIXED = 1e-10
TOL_KMS_RATE = 1e-10


class KMSViolation(ValueError):
    """Rate function violates gamma(-w) = exp(-beta w) gamma(w)."""


# --------------------------------------------------------------------------
# rate functions
# --------------------------------------------------------------------------

def _glauber(beta, w):
    return expit(beta * np.asarray(w, dtype=float))


def _exponential(beta, w):
    return np.exp(0.5 * beta * np.asarray(w, dtype=float))


def _metropolis(beta, w):
    return np.exp(np.minimum(0.0, beta * np.asarray(w, dtype=float)))


RATE_FUNCTIONS: dict[str, Callable] = {
    "glauber": _glauber,
    "exponential": _exponential,
    "metropolis": _metropolis,
}


def rate_function(name: str) -> Callable:
    try:
        return RATE_FUNCTIONS[name]
    except KeyError:
        raise ValueError(f"unknown rate function {name!r}; choose from {sorted(RATE_FUNCTIONS)}") from None


def kms_ratio_violation(gamma: Callable, beta: float, omegas: Iterable[float]) -> tuple[float, float]:
    """Worst relative violation of ``gamma(-w) = exp(-beta w) gamma(w)`` and its ``w``."""
    worst, at = 0.0, 0.0
    for w in omegas:
        lhs = float(gamma(beta, -w))
        rhs = float(np.exp(-beta * w) * gamma(beta, w))
        err = abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)
        if err > worst:
            worst, at = err, w
    return worst, at


# --------------------------------------------------------------------------
# Bohr decomposition
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BohrDecomposition:
    label: str
    omegas: np.ndarray
    components: list = field(repr=False)

    def reconstruct(self) -> np.ndarray:
        return sum(self.components)

    def __iter__(self):
        return iter(zip(self.omegas, self.components))


def bohr_decompose(h, s, label: str = "S", tol_omega: float | None = None) -> BohrDecomposition:
    """Split ``s`` into Bohr components ``S(w) = sum_{E'-E=w} P_E S P_E'``."""
    h = np.asarray(h, dtype=complex)
    s = np.asarray(s, dtype=complex)
    evals, v = herm_eig(h)
    scale = max(1.0, float(np.max(np.abs(evals), initial=0.0)))
    tol = 1e-9 * scale if tol_omega is None else tol_omega
    lev, means = group_values(evals, tol)
    e = means[lev]
    se = v.conj().T @ s @ v
    nz = np.abs(se) > 1e-14 * max(1.0, float(np.max(np.abs(se), initial=0.0)))
    freq = e[None, :] - e[:, None]
    if not np.any(nz):
        return BohrDecomposition(label, np.zeros(0), [])
    lab, omegas = group_values(freq[nz], tol)
    comps = []
    rows, cols = np.nonzero(nz)
    for k in range(omegas.size):
        part = np.zeros_like(se)
        sel = lab == k
        part[rows[sel], cols[sel]] = se[rows[sel], cols[sel]]
        comps.append(v @ part @ v.conj().T)
    return BohrDecomposition(label, omegas, comps)


# --------------------------------------------------------------------------
# jumps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Jump:
    site: int
    label: str
    op: np.ndarray = field(repr=False)


def pauli_jumps(n: int, sites: Iterable[int] | None = None, paulis: str = "XYZ") -> list[Jump]:
    """Single-site Pauli jumps on every listed site."""
    idx = SiteIndexing(n, 2)
    sites = range(n) if sites is None else sites
    return [Jump(x, p, embed_local(pauli_string(p), [x], idx)) for x in sites for p in paulis]


def jumps_from_spec(n: int, spec: Sequence) -> list[Jump]:
    """Jumps from ``[(site, pauli_string), ...]``; a k-letter string acts on sites
    ``site, site+1, ..., site+k-1`` (mod n) and is anchored at ``site``."""
    idx = SiteIndexing(n, 2)
    out = []
    for site, label in spec:
        site = int(site)
        sites = [(site + k) % n for k in range(len(label))]
        out.append(Jump(site, label, embed_local(pauli_string(label), sites, idx)))
    return out


# --------------------------------------------------------------------------
# generator
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _EnergyJump:
    jump: Jump
    se: np.ndarray  # jump in the energy basis
    omegas: np.ndarray
    masks: list  # boolean masks of each Bohr component in the energy basis


class DaviesGenerator:
    """Davies generator restricted to the jumps anchored in ``region``.

    Instances are treated as immutable; ``restrict`` returns new generators
    sharing the energy basis and Bohr sectors.
    """

    def __init__(self, hamiltonian, beta: float, jumps: Sequence[Jump], rate_fn: str = "glauber",
                 region: Iterable[int] | None = None, structure: SectorStructure | None = None):
        if isinstance(hamiltonian, ChainHamiltonian):
            self.hamiltonian = hamiltonian
            h = hamiltonian.total
            n = hamiltonian.n
        else:
            h = np.asarray(hamiltonian, dtype=complex)
            self.hamiltonian = None
            n = int(round(np.log2(h.shape[0])))
        if not np.isfinite(beta) or beta < 0:
            raise ValueError("beta must be finite and non-negative")
        self.h = h
        self.n = n
        self.beta = float(beta)
        self.rate_fn = rate_fn
        self.gamma = rate_function(rate_fn)
        self.structure = structure if structure is not None else SectorStructure(h, beta)
        all_sites = sorted({j.site for j in jumps})
        self.region = tuple(sorted(set(all_sites if region is None else region)))
        self.jumps = tuple(j for j in jumps if j.site in self.region)
        self._all_jumps = tuple(jumps)
        self._check_kms()

    # -- construction helpers ------------------------------------------------

    @cached_property
    def energy_jumps(self) -> list[_EnergyJump]:
        st = self.structure
        e = st.energies
        freq = e[None, :] - e[:, None]
        out = []
        for j in self.jumps:
            se = st.to_energy(j.op)
            nz = np.abs(se) > 1e-14 * max(1.0, float(np.max(np.abs(se), initial=0.0)))
            se = np.where(nz, se, 0.0)
            if np.any(nz):
                lab, omegas = group_values(freq[nz], st.tol_omega)
                rows, cols = np.nonzero(nz)
                masks = []
                for k in range(omegas.size):
                    m = np.zeros(se.shape, dtype=bool)
                    m[rows[lab == k], cols[lab == k]] = True
                    masks.append(m)
            else:
                omegas, masks = np.zeros(0), []
            out.append(_EnergyJump(j, se, omegas, masks))
        return out

    def bohr_frequencies(self) -> np.ndarray:
        if not self.energy_jumps:
            return np.zeros(0)
        return np.unique(np.concatenate([ej.omegas for ej in self.energy_jumps]))

    def _check_kms(self):
        omegas = self.bohr_frequencies()
        worst, at = kms_ratio_violation(self.gamma, self.beta, omegas)
        if worst > TOL_KMS_RATE:
            raise KMSViolation(
                f"rate {self.rate_fn!r} violates gamma(-w) = exp(-beta w) gamma(w) at w={at:.6g} "
                f"(relative error {worst:.3e})"
            )

    @cached_property
    def _k_energy(self) -> np.ndarray:
        """``sum_{a,w} gamma(w) S_a(w)^+ S_a(w)`` in the energy basis."""
        st = self.structure
        e = st.energies
        g = self.gamma(self.beta, e[None, :] - e[:, None])  # g[c, a] = gamma(E_a - E_c)
        k = np.zeros((st.dim, st.dim), dtype=complex)
        for ej in self.energy_jumps:
            k += (g * ej.se).conj().T @ ej.se
        return np.where(st.same_level(), k, 0.0)

    def restrict(self, region: Iterable[int]) -> "DaviesGenerator":
        """``L_A``; results are cached so repeated restrictions share their blocks."""
        key = tuple(sorted(set(region)))
        cache = self.__dict__.setdefault("_restrictions", {})
        if key not in cache:
            cache[key] = DaviesGenerator(self.hamiltonian if self.hamiltonian is not None else self.h,
                                         self.beta, self._all_jumps, self.rate_fn, region=key,
                                         structure=self.structure)
        return cache[key]

    @cached_property
    def local_parts(self) -> dict[int, "DaviesGenerator"]:
        return {x: self.restrict([x]) for x in self.region}

    # -- action --------------------------------------------------------------

    def apply_energy(self, re: np.ndarray) -> np.ndarray:
        st = self.structure
        e = st.energies
        out = -0.5 * (self._k_energy @ re + re @ self._k_energy)
        for ej in self.energy_jumps:
            for w, m in zip(ej.omegas, ej.masks):
                sw = np.where(m, ej.se, 0.0)
                out += self.gamma(self.beta, w) * (sw @ re @ sw.conj().T)
        return out

    def __call__(self, rho) -> np.ndarray:
        """Schrodinger-picture action on an operator in the computational basis."""
        st = self.structure
        return st.from_energy(self.apply_energy(st.to_energy(rho)))

    def heisenberg(self, x) -> np.ndarray:
        st = self.structure
        xe = st.to_energy(x)
        out = -0.5 * (self._k_energy @ xe + xe @ self._k_energy)
        for ej in self.energy_jumps:
            for w, m in zip(ej.omegas, ej.masks):
                sw = np.where(m, ej.se, 0.0)
                out += self.gamma(self.beta, w) * (sw.conj().T @ xe @ sw)
        return st.from_energy(out)

    @cached_property
    def superoperator(self) -> SuperOperator:
        """Dense column-stacking matrix in the computational basis."""
        d = self.structure.dim
        eye = np.eye(d, dtype=complex)
        k = self.structure.from_energy(self._k_energy)
        m = -0.5 * (np.kron(eye, k) + np.kron(k.T, eye))
        for ej in self.energy_jumps:
            for w, mask in zip(ej.omegas, ej.masks):
                sw = self.structure.from_energy(np.where(mask, ej.se, 0.0))
                m += self.gamma(self.beta, w) * np.kron(sw.conj(), sw)
        return SuperOperator(m)

    @cached_property
    def sectors(self) -> SectorOperator:
        """KMS-frame Bohr-sector blocks of the generator."""
        st = self.structure
        e = st.energies
        b = self.beta
        blocks = []
        for sec in st.sectors:
            r, c = sec.rows, sec.cols
            if not self.energy_jumps:
                blocks.append(np.zeros((sec.size, sec.size), dtype=complex))
                continue
            de = e[r][None, :] - e[r][:, None]  # E_{i_q} - E_{i_p}
            weight = self.gamma(b, de) * np.exp(-0.5 * b * de)
            m = np.zeros((sec.size, sec.size), dtype=complex)
            for ej in self.energy_jumps:
                m += ej.se[np.ix_(r, r)] * ej.se[np.ix_(c, c)].conj()
            # weight depends only on (p, q) through de, common to every jump
            m *= weight
            kk = self._k_energy
            m -= 0.5 * (kk[np.ix_(r, r)] * (c[:, None] == c[None, :])
                        + (r[:, None] == r[None, :]) * kk[np.ix_(c, c)].T)
            blocks.append(m)
        return SectorOperator(st, blocks)

    # -- diagnostics ----------------------------------------------------------

    @property
    def sigma(self) -> np.ndarray:
        return self.structure.sigma

    def fixed_point_residual(self, sigma=None) -> float:
        sigma = self.sigma if sigma is None else sigma
        return trace_norm(self(sigma))

    def check_detailed_balance(self) -> float:
        """``||M - M^dagger||_inf`` of the KMS-symmetrized generator."""
        return self.sectors.hermiticity_residual()

    def check_ergodic(self, tol: float = TOL_KERNEL) -> tuple[bool, int]:
        dim = self.sectors.kernel_dim(tol)
        return dim == 1, dim

    def spectral_gap(self, tol: float = TOL_KERNEL) -> float:
        ev = np.abs(self.sectors.eigenvalues())
        zero = np.count_nonzero(ev < tol)
        if zero != 1:
            raise NonErgodicError(f"kernel dimension {zero} != 1; generator is not ergodic")
        return float(np.min(ev[ev >= tol]))

    def evolve(self, rho, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("t must be non-negative")
        return self.sectors.evolve(rho, t)


def davies_generator(h, beta: float, jumps=None, rate_fn: str = "glauber", region=None) -> DaviesGenerator:
    """Build a Davies generator.

    ``jumps`` may be ``None`` (Pauli X, Y, Z on every site), a list of
    :class:`Jump`, or a list of ``(site, pauli_string)`` pairs.  ``region``
    defaults to every site carrying a jump.
    """
    n = h.n if isinstance(h, ChainHamiltonian) else int(round(np.log2(np.asarray(h).shape[0])))
    if jumps is None:
        jumps = pauli_jumps(n)
    elif len(jumps) and not isinstance(jumps[0], Jump):
        jumps = jumps_from_spec(n, jumps)
    return DaviesGenerator(h, beta, list(jumps), rate_fn, region=region)


# --------------------------------------------------------------------------
# KMS inner product
# --------------------------------------------------------------------------

def kms_inner(x, y, sigma) -> complex:
    """``<x, y>_sigma = tr(sigma^{1/2} x^+ sigma^{1/2} y)``."""
    s = powm_h(sigma, 0.5)
    return complex(np.trace(s @ np.asarray(x).conj().T @ s @ np.asarray(y)))


def kms_symmetrize(L: SuperOperator, sigma) -> SuperOperator:
    """``Gamma^{1/2} o L^* o Gamma^{-1/2}`` with ``Gamma(X) = sigma^{1/2} X sigma^{1/2}``.

    Dense route for small systems; the result is Hermitian iff ``L`` is
    KMS-detailed-balanced.
    """
    w, v = herm_eig(sigma)
    if np.min(w) <= 0:
        raise ValueError("sigma must be full rank")
    q = (v * w**0.25) @ v.conj().T
    qi = (v * w**-0.25) @ v.conj().T
    fwd = np.kron(q.T, q)
    bwd = np.kron(qi.T, qi)
    return SuperOperator(fwd @ L.adjoint().matrix @ bwd)


def detailed_balance_residual(L: SuperOperator, sigma) -> float:
    m = kms_symmetrize(L, sigma).matrix
    return op_norm(m - m.conj().T)


def ccp_violation(L: SuperOperator) -> float:
    """Most negative eigenvalue of the Choi matrix compressed off the maximally
    entangled vector; >= 0 means conditionally completely positive."""
    d = L.dim
    c = L.choi()
    omega = np.eye(d).reshape(-1) / np.sqrt(d)
    p = np.eye(d * d) - np.outer(omega, omega)
    return float(np.linalg.eigvalsh(p @ c @ p)[0])


# --------------------------------------------------------------------------
# symmetry
# --------------------------------------------------------------------------

@dataclass
class CovarianceReport:
    element: str
    residual: float
    phases: dict = field(default_factory=dict)
    passed: bool = False


def default_probes(dim: int, count: int = 20, seed: int = 0) -> list[np.ndarray]:
    """All computational basis states plus seeded random pure states."""
    rng = rng_from(seed)
    probes = [basis_density(dim, k) for k in range(dim)]
    probes += [pure_density(haar_pure(dim, rng)) for _ in range(count)]
    return probes


def jump_phase(s: np.ndarray, u: np.ndarray, tol: float = 1e-10) -> complex | None:
    """Phase w with ``S u = w u S`` if one exists."""
    lhs = s @ u
    rhs = u @ s
    denom = np.vdot(rhs, rhs)
    if abs(denom) < 1e-300:
        return None
    w = np.vdot(rhs, lhs) / denom
    return complex(w) if op_norm(lhs - w * rhs) <= tol * max(1.0, op_norm(lhs)) else None


def check_covariance(gen: DaviesGenerator, rep: SymmetryRep, probes=None, tol: float = 1e-10) -> list[CovarianceReport]:
    probes = default_probes(gen.structure.dim) if probes is None else probes
    if not probes:
        raise ValueError("probe set must be nonempty")
    out = []
    for g in rep.labels:
        u = rep[g]
        worst = 0.0
        for rho in probes:
            lhs = gen(u.conj().T @ rho @ u)
            rhs = u.conj().T @ gen(rho) @ u
            worst = max(worst, trace_norm(lhs - rhs))
        phases = {}
        for j in gen.jumps:
            w = jump_phase(j.op, u)
            phases[(j.site, j.label)] = w
        out.append(CovarianceReport(g, worst, phases, worst <= tol))
    return out


@dataclass
class StrongSymmetryReport:
    fixed_space_dim: int
    is_ergodic: bool
    invariance_residual: float
    n_jumps: int
    message: str = ""


def strong_symmetry_witness(h, rep: SymmetryRep, beta: float, rate_fn: str = "glauber", probes=None,
                            candidates: Sequence[Jump] | None = None) -> StrongSymmetryReport:
    """Davies generator with only the jumps commuting with every ``u_g``.

    Checks ``tr(u_g L(rho)) = 0`` on probes and reports the fixed-space
    dimension; for a reducible representation it exceeds one.
    """
    n = h.n if isinstance(h, ChainHamiltonian) else int(round(np.log2(np.asarray(h).shape[0])))
    candidates = pauli_jumps(n) if candidates is None else candidates
    keep = [j for j in candidates
            if all(op_norm(j.op @ rep[g] - rep[g] @ j.op) <= 1e-12 for g in rep.labels)]
    if not keep:
        return StrongSymmetryReport(0, False, float("nan"), 0, "no jump commutes with the representation")
    gen = DaviesGenerator(h, beta, keep, rate_fn)
    probes = default_probes(gen.structure.dim) if probes is None else probes
    worst = 0.0
    for rho in probes:
        lr = gen(rho)
        for g in rep.labels:
            worst = max(worst, abs(np.trace(rep[g] @ lr)))
    ergodic, dim = gen.check_ergodic()
    return StrongSymmetryReport(dim, ergodic, worst, len(keep))
