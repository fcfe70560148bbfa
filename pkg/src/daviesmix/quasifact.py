"""Quasi-factorization inequalities for the relative entropy.

Three granularities are checked on probe states:

* global: ``D(rho||sigma) <= c_h (D_A + D_B)`` and the segment version
  ``D <= c_h sum_i (D_{A_i} + D_{B_i})`` with ``c_h = 1 / (1 - 2 ||h||)``;
* local: ``DD_X <= K_X sum_{j in X} DD_j`` with ``DD_A(rho) = D(rho || E_A rho)``;
* combined: ``D <= C sum_i DD_{X_i}`` and the end-to-end chain
  ``D <= K alpha0^{-1} EP`` compared against a direct MLSI estimate.

``K_X``, ``C`` and ``K`` are empirical: the largest ratio over the probes.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .condexp import ConditionalExpectation, conditional_expectation
from .davies import DaviesGenerator
from .entropy import cond_rel_entropy_DA, cond_rel_entropy_EA, rel_entropy
from .geometry import SplittingGeometry
from .gibbs import overlap_operator
from .mixing import site_constants

TOL_QF = 1e-9
TOL_ZERO = 1e-12


class QuasiFactorizationViolation(RuntimeError):
    """A right-hand side vanished while the left-hand side did not."""


@dataclass
class QFReport:
    """One inequality ``LHS <= constant * RHS`` over a probe set.

    ``lhs``/``rhs`` are from the probe with the smallest slack
    ``constant * rhs - lhs``.  ``applicable`` is False when the constant is
    undefined (inadmissible geometry); ``passed`` is then None.
    """

    kind: str
    lhs: float
    rhs: float
    constant: float | None
    slack: float
    applicable: bool = True
    n_probes: int = 0
    detail: dict | None = None

    @property
    def passed(self) -> bool | None:
        if not self.applicable:
            return None
        return self.slack >= -TOL_QF

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def _worst(kind, rows, constant, detail=None) -> QFReport:
    """Report the probe with the smallest slack; ``rows`` are ``(lhs, rhs)``."""
    if not rows:
        return QFReport(kind, 0.0, 0.0, constant, 0.0, True, 0, detail)
    slacks = [constant * r - l for l, r in rows]
    k = int(np.argmin(slacks))
    return QFReport(kind, rows[k][0], rows[k][1], constant, float(slacks[k]), True, len(rows), detail)


def _empirical(kind, rows, detail=None) -> QFReport:
    """Smallest constant making ``lhs <= c * rhs`` hold on every probe."""
    c = 0.0
    for l, r in rows:
        if r <= TOL_ZERO:
            if l > TOL_ZERO:
                raise QuasiFactorizationViolation(f"{kind}: rhs {r:.3e} vanishes with lhs {l:.3e}")
            continue
        c = max(c, l / r)
    return _worst(kind, rows, c, detail)


def qf_verify_global(probes: Sequence[np.ndarray], sigma, geometry: SplittingGeometry) -> list[QFReport]:
    """Two-region and segment-wise quasi-factorization with ``c = 1/(1 - 2||h||)``."""
    ov = overlap_operator(sigma, geometry)
    info = {"h_infty_norm": ov.h_infty_norm, "geometry": geometry.to_dict()}
    if not ov.admissible:
        return [QFReport(k, float("nan"), float("nan"), None, float("nan"), False, 0, info)
                for k in ("global-AB", "global-segments")]
    two, seg = [], []
    for rho in probes:
        d = rel_entropy(rho, sigma).value
        da = cond_rel_entropy_DA(rho, sigma, geometry.A).value
        db = cond_rel_entropy_DA(rho, sigma, geometry.B).value
        parts = sum(cond_rel_entropy_DA(rho, sigma, s).value for s in geometry.A_segments + geometry.B_segments)
        two.append((d, da + db))
        seg.append((d, parts))
    return [_worst("global-AB", two, ov.qf_constant, info), _worst("global-segments", seg, ov.qf_constant, info)]


def qf_verify_local(probes: Sequence[np.ndarray], gen: DaviesGenerator, region,
                    E_X: ConditionalExpectation | None = None,
                    E_sites: dict[int, ConditionalExpectation] | None = None) -> QFReport:
    """Empirical ``K_X = max DD_X / sum_j DD_j`` over the probes."""
    region = sorted(region)
    E_X = E_X or conditional_expectation(gen, region)
    E_sites = E_sites or {x: conditional_expectation(gen, [x]) for x in region}
    rows = []
    for rho in probes:
        lhs = cond_rel_entropy_EA(rho, E_X).value
        rhs = sum(cond_rel_entropy_EA(rho, E_sites[x]).value for x in region)
        rows.append((lhs, rhs))
    return _empirical("local", rows, {"region": region})


def qf_verify_combined(probes: Sequence[np.ndarray], gen: DaviesGenerator, geometry: SplittingGeometry,
                       alpha_hat: float | None = None,
                       E_sites: dict[int, ConditionalExpectation] | None = None) -> list[QFReport]:
    """Cover-level constant ``C``, site-level ``K``/``alpha0`` and the chain bound.

    The chain report compares ``alpha0 / K`` (the lower bound on the MLSI
    constant the chain produces) against ``alpha_hat``: its slack is
    ``1.05 * alpha_hat - alpha0 / K``.
    """
    sigma = gen.sigma
    E_cover = [conditional_expectation(gen, seg) for seg in geometry.X_cover]
    E_sites = E_sites or {x: conditional_expectation(gen, [x]) for x in gen.region}
    rows = []
    for rho in probes:
        d = rel_entropy(rho, sigma).value
        rows.append((d, sum(cond_rel_entropy_EA(rho, E).value for E in E_cover)))
    reports = [_empirical("cover", rows, {"cover": [list(s) for s in geometry.X_cover]})]
    alpha0, K = site_constants(gen, probes, E_sites)
    if alpha_hat is not None and alpha0 is not None and K:
        bound = alpha0 / K
        reports.append(QFReport("chain", bound, alpha_hat, 1.05, 1.05 * alpha_hat - bound, True, len(probes),
                                {"alpha0_site": alpha0, "K_hat": K, "alpha_hat": alpha_hat}))
    return reports
