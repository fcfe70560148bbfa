"""Conditional expectations of Davies generators and the detectability contraction."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .davies import DaviesGenerator
from .sectors import TOL_KERNEL, SectorOperator
from .tensor import SuperOperator, trace_norm

TOL_CE = 1e-10
K_STAR_TOL = 1e-6


@dataclass
class ConditionalExpectation:
    """``E_A``: KMS-orthogonal projection onto the fixed points of ``L_A``."""

    region: tuple[int, ...]
    op: SectorOperator = field(repr=False)
    provenance: str = "kernel-projection"

    def __call__(self, x) -> np.ndarray:
        return self.op(x)

    @property
    def structure(self):
        return self.op.structure

    def to_superoperator(self) -> SuperOperator:
        return self.op.to_superoperator()

    def idempotence_residual(self) -> float:
        return (self.op @ self.op - self.op).kms_norm()

    def sigma_residual(self) -> float:
        s = self.structure.sigma
        return trace_norm(self(s) - s)

    def selfadjoint_residual(self) -> float:
        return self.op.hermiticity_residual()

    def trace_residual(self, probes: Sequence[np.ndarray]) -> float:
        return max((abs(np.trace(self(p)) - np.trace(p)) for p in probes), default=0.0)

    def choi_min_eig(self) -> float:
        """Smallest eigenvalue of the Choi matrix (dense; small systems only)."""
        c = self.to_superoperator().choi()
        return float(np.linalg.eigvalsh((c + c.conj().T) / 2)[0])


def conditional_expectation(gen: DaviesGenerator, region=None, tol: float = TOL_KERNEL) -> ConditionalExpectation:
    """Kernel projection of the KMS-symmetrized ``L_A``.

    Raises :class:`~daviesmix.sectors.KernelAmbiguityError` when the spectrum
    has eigenvalues too close to the kernel threshold.
    """
    g = gen if region is None else gen.restrict(region)
    return ConditionalExpectation(g.region, g.sectors.kernel_projection(tol), "kernel-projection")


@dataclass
class SemigroupLimitReport:
    times: list[float]
    residuals: list[float]

    @property
    def final(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0

    @property
    def monotone(self) -> bool:
        r = self.residuals
        return all(b <= a + 1e-12 for a, b in zip(r, r[1:]))


def semigroup_limit_check(gen: DaviesGenerator, E: ConditionalExpectation, times: Sequence[float],
                          region=None) -> SemigroupLimitReport:
    """``||exp(T L_A) - E_A||`` (dense spectral norm) over a grid of ``T``.

    The exponential is taken with ``scipy.linalg.expm`` on the dense
    computational-basis superoperator, independent of the sector machinery.
    """
    g = gen if region is None else gen.restrict(region)
    lmat = g.superoperator.matrix
    e = E.to_superoperator().matrix
    res = [float(np.linalg.norm(expm(t * lmat) - e, 2)) for t in times]
    return SemigroupLimitReport([float(t) for t in times], res)


@dataclass
class DetectabilityReport:
    region: tuple[int, ...]
    order: tuple[int, ...]
    lam: float
    decay: list[float]
    k_star: int | None
    tol: float = K_STAR_TOL

    @property
    def passed(self) -> bool:
        return self.lam < 1.0

    @property
    def monotone(self) -> bool:
        return all(b <= a + 1e-12 for a, b in zip(self.decay, self.decay[1:]))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["region"] = list(self.region)
        d["order"] = list(self.order)
        d["lambda"] = d.pop("lam")
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def site_product(E_sites: Sequence[ConditionalExpectation]) -> SectorOperator:
    """``E_{x_1} E_{x_2} ... E_{x_m}`` as a composition, written left to right."""
    out = E_sites[0].op
    for e in E_sites[1:]:
        out = out @ e.op
    return out


def product_expectation_distance(E_sites: Sequence[ConditionalExpectation], E_X: ConditionalExpectation,
                                 k_max: int = 25, tol: float = K_STAR_TOL,
                                 order: str = "ascending") -> DetectabilityReport:
    """KMS norm of ``(prod_j E_j)^k - E_X`` for ``k = 1..k_max``.

    ``order`` is ``"ascending"`` (default) or ``"descending"`` in site label.
    """
    if not E_sites:
        raise ValueError("need at least one single-site expectation")
    sites = sorted(E_sites, key=lambda e: e.region, reverse=(order == "descending"))
    if set().union(*(set(e.region) for e in sites)) != set(E_X.region):
        raise ValueError("single-site regions must enumerate X")
    p = site_product(sites)
    decay = []
    k_star = None
    pk = p
    for k in range(1, k_max + 1):
        if k > 1:
            pk = pk @ p
        val = (pk - E_X.op).kms_norm()
        decay.append(val)
        if k_star is None and val <= tol:
            k_star = k
    order_sites = tuple(x for e in sites for x in e.region)
    return DetectabilityReport(tuple(E_X.region), order_sites, decay[0], decay, k_star, tol)


def detectability(gen: DaviesGenerator, region, k_max: int = 25, order: str = "ascending") -> DetectabilityReport:
    """Convenience wrapper building ``E_X`` and every ``E_x`` from ``gen``."""
    region = sorted(region)
    E_X = conditional_expectation(gen, region)
    E_sites = [conditional_expectation(gen, [x]) for x in region]
    return product_expectation_distance(E_sites, E_X, k_max, order=order)
