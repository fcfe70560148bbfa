"""Relative entropies, conditional relative entropies and entropy production (nats)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import SiteIndexing, floor_eigenvalues, herm_eig, partial_trace


@dataclass(frozen=True)
class EntropyValue:
    """An entropy in nats plus the number of eigenvalues that hit the floor."""

    value: float
    floor_hits: int = 0

    def __float__(self) -> float:
        return self.value


def _log_floored(a) -> tuple[np.ndarray, int]:
    w, v = herm_eig(a)
    wf, hits = floor_eigenvalues(w)
    return (v * np.log(wf)) @ v.conj().T, hits


def _neg_entropy(rho) -> float:
    """``tr rho ln rho`` with ``0 ln 0 = 0``."""
    w = np.linalg.eigvalsh(rho)
    w = w[w > 0]
    return float(np.sum(w * np.log(w)))


def rel_entropy(rho, sigma) -> EntropyValue:
    """``D(rho||sigma) = tr rho (ln rho - ln sigma)``."""
    rho = np.asarray(rho)
    log_sigma, hits = _log_floored(sigma)
    val = _neg_entropy(rho) - float(np.real(np.trace(rho @ log_sigma)))
    return EntropyValue(val, hits)


def _n_sites(rho) -> int:
    return int(round(np.log2(np.asarray(rho).shape[0])))


def cond_rel_entropy_DA(rho, sigma, region) -> EntropyValue:
    """``D_A(rho||sigma) = D(rho||sigma) - D(rho_{A^c}||sigma_{A^c})``."""
    n = _n_sites(rho)
    idx = SiteIndexing(n, 2)
    comp = sorted(set(range(n)) - set(region))
    full = rel_entropy(rho, sigma)
    if not comp:
        return full
    part = rel_entropy(partial_trace(rho, comp, idx), partial_trace(sigma, comp, idx))
    return EntropyValue(full.value - part.value, full.floor_hits + part.floor_hits)


def cond_rel_entropy_EA(rho, E_A) -> EntropyValue:
    """``D(rho || E_A(rho))`` for a conditional expectation ``E_A`` (any callable map)."""
    target = E_A(rho)
    target = (target + target.conj().T) / 2
    return rel_entropy(rho, target)


def entropy_production(gen, rho, sigma=None, region=None) -> EntropyValue:
    """``EP_A(rho) = -tr[L_A(rho) (ln rho - ln sigma)]``.

    ``gen`` is a Davies generator; ``region`` restricts it (default: the
    generator's own region).
    """
    sigma = gen.sigma if sigma is None else sigma
    g = gen if region is None else gen.restrict(region)
    log_rho, hits_r = _log_floored(rho)
    log_sigma, hits_s = _log_floored(sigma)
    val = -float(np.real(np.trace(g(rho) @ (log_rho - log_sigma))))
    return EntropyValue(val, hits_r + hits_s)
