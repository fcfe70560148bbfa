"""Gibbs states, marginals and the overlap operator of a splitting."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .geometry import SplittingGeometry
from .models import ChainHamiltonian
from .tensor import (SiteIndexing, floor_eigenvalues, herm_eig, op_norm, partial_trace,
                     product_operator)

OVERLAP_CSV_COLUMNS = ("n", "beta", "overlap_width", "h_infty_norm", "qf_constant")


@dataclass(frozen=True)
class GibbsState:
    beta: float
    hamiltonian: ChainHamiltonian | None
    state: np.ndarray = field(repr=False)
    log_partition: float = 0.0

    @property
    def indexing(self) -> SiteIndexing:
        return SiteIndexing(int(round(np.log2(self.state.shape[0]))), 2)


def gibbs_state(h, beta: float) -> GibbsState:
    """``exp(-beta H) / Z`` with the spectrum shifted by its minimum before exponentiating."""
    if not np.isfinite(beta) or beta < 0:
        raise ValueError("beta must be finite and non-negative")
    ham = h if isinstance(h, ChainHamiltonian) else None
    mat = h.total if ham is not None else np.asarray(h, dtype=complex)
    w, v = herm_eig(mat)
    shifted = np.exp(-beta * (w - w[0]))
    z = shifted.sum()
    sigma = (v * (shifted / z)) @ v.conj().T
    sigma = (sigma + sigma.conj().T) / 2
    return GibbsState(float(beta), ham, sigma, float(np.log(z) - beta * w[0]))


def _state(s) -> np.ndarray:
    return s.state if isinstance(s, GibbsState) else np.asarray(s)


def marginal(s, region, idx: SiteIndexing | None = None) -> np.ndarray:
    """Reduced state on ``region`` (sites relabelled in ascending order)."""
    rho = _state(s)
    region = sorted(region)
    if not region:
        raise ValueError("region must be nonempty")
    idx = idx or SiteIndexing(int(round(np.log2(rho.shape[0]))), 2)
    return partial_trace(rho, region, idx)


@dataclass
class OverlapReport:
    A_c: tuple
    B_c: tuple
    h_operator: np.ndarray = field(repr=False)
    h_infty_norm: float = 0.0
    admissible: bool = True
    qf_constant: float | None = 1.0
    floor_hits: int = 0


def _inv_sqrt(rho) -> tuple[np.ndarray, int]:
    w, v = herm_eig(rho)
    wf, hits = floor_eigenvalues(w)
    return (v * wf**-0.5) @ v.conj().T, hits


def overlap_operator(s, geometry: SplittingGeometry) -> OverlapReport:
    """``h = (s_Ac^{-1/2} (x) s_Bc^{-1/2}) s_AcBc (s_Ac^{-1/2} (x) s_Bc^{-1/2}) - 1`` on A^c u B^c."""
    rho = _state(s)
    ac, bc = geometry.A_c, geometry.B_c
    if set(ac) & set(bc):
        raise ValueError("A^c and B^c must be disjoint")
    union = sorted(set(ac) | set(bc))
    if not ac or not bc:
        dim = 2 ** len(union)
        return OverlapReport(ac, bc, np.zeros((dim, dim), dtype=complex), 0.0, True, 1.0)
    idx = SiteIndexing(geometry.n, 2)
    s_joint = partial_trace(rho, union, idx)
    s_a, hits_a = _inv_sqrt(partial_trace(rho, ac, idx))
    s_b, hits_b = _inv_sqrt(partial_trace(rho, bc, idx))
    sub = SiteIndexing(len(union), 2)
    pos = {x: k for k, x in enumerate(union)}
    # factors from partial_trace are in their own little-endian order; product_operator
    # expects kron order (first listed site slowest)
    fa = [pos[x] for x in sorted(ac, reverse=True)]
    fb = [pos[x] for x in sorted(bc, reverse=True)]
    g = product_operator([(s_a, fa), (s_b, fb)], sub)
    h = g @ s_joint @ g - np.eye(s_joint.shape[0])
    h = (h + h.conj().T) / 2
    norm = op_norm(h)
    admissible = norm < 0.5
    return OverlapReport(tuple(ac), tuple(bc), h, norm, admissible,
                         1.0 / (1.0 - 2.0 * norm) if admissible else None, hits_a + hits_b)


@dataclass
class OverlapRow:
    n: int
    beta: float
    overlap_width: int
    h_infty_norm: float
    qf_constant: float | None


def overlap_decay_scan(states, geometries) -> list[OverlapRow]:
    """``||h||_inf`` for each (state, geometry) pair."""
    rows = []
    for s, geo in zip(states, geometries):
        rep = overlap_operator(s, geo)
        beta = s.beta if isinstance(s, GibbsState) else float("nan")
        rows.append(OverlapRow(geo.n, beta, geo.overlap, rep.h_infty_norm, rep.qf_constant))
    return rows


def is_decreasing(values, strict: bool = True, slack: float = 1e-12) -> bool:
    v = list(values)
    if strict:
        return all(b < a for a, b in zip(v, v[1:]))
    return all(b <= a + slack for a, b in zip(v, v[1:]))


def overlap_rows_to_csv(rows, fh=None) -> str:
    buf = fh or io.StringIO()
    w = csv.writer(buf)
    w.writerow(OVERLAP_CSV_COLUMNS)
    for r in rows:
        w.writerow([r.n, fmt(r.beta), r.overlap_width, fmt(r.h_infty_norm),
                    "" if r.qf_constant is None else fmt(r.qf_constant)])
    return buf.getvalue() if fh is None else ""


def fmt(x) -> str:
    return f"{float(x):.17g}"
