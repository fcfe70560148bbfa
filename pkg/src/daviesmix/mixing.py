"""Spectral gap, mixing times and MLSI-constant estimates.

The MLSI constant follows the normalization ``2 alpha D(rho||sigma) <= EP(rho)``,
so ``D(exp(tL) rho || sigma) <= exp(-2 alpha t) D(rho || sigma)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .condexp import ConditionalExpectation, conditional_expectation
from .davies import DaviesGenerator
from .entropy import cond_rel_entropy_EA, entropy_production, rel_entropy
from .states import basis_density, haar_pure, pure_density, rng_from
from .tensor import powm_h, trace_norm

D_MIN = 1e-12
MIX_WEIGHTS = (0.01, 0.1, 0.5)
BASIS_FLOOR = 1e-6


def evolve(gen: DaviesGenerator, rho0, t: float) -> np.ndarray:
    """``exp(tL)(rho0)``."""
    return gen.evolve(rho0, t)


def spectral_gap(gen: DaviesGenerator) -> float:
    return gen.spectral_gap()


# --------------------------------------------------------------------------
# mixing time
# --------------------------------------------------------------------------

def mixing_probes(dim: int, count: int = 20, seed=0) -> list[np.ndarray]:
    """All computational basis states followed by ``count`` seeded Haar pure states."""
    rng = rng_from(seed)
    return [basis_density(dim, k) for k in range(dim)] + [pure_density(haar_pure(dim, rng)) for _ in range(count)]


@dataclass
class MixingReport:
    """Hitting times of ``||exp(tL) rho - sigma||_1 <= epsilon`` over a probe family.

    ``t_mix_lower_estimate`` is the maximum over probes, hence a lower bound
    on the worst case over all states.
    """

    epsilon: float
    hitting_times: list[float]
    t_mix_lower_estimate: float
    trajectories: list[list[tuple[float, float]]] = field(repr=False, default_factory=list)
    converged: bool = True

    def to_dict(self) -> dict:
        return {"epsilon": self.epsilon, "hitting_times": self.hitting_times,
                "t_mix_lower_estimate": self.t_mix_lower_estimate, "converged": self.converged}


def hitting_time(dist, epsilon: float, t_guess: float, t_cap: float, tol: float = 1e-3) -> float | None:
    """First ``t`` with ``dist(t) <= epsilon`` for a non-increasing ``dist``."""
    if dist(0.0) <= epsilon:
        return 0.0
    lo, hi = 0.0, max(t_guess, tol)
    while dist(hi) > epsilon:
        lo, hi = hi, 2.0 * hi
        if lo >= t_cap:
            return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if dist(mid) > epsilon:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def mixing_time_estimate(gen: DaviesGenerator, epsilon: float, probes: Sequence[np.ndarray] | None = None,
                         tol: float = 1e-3, samples: int = 16) -> MixingReport:
    if not 0 < epsilon < 2:
        raise ValueError("epsilon must lie in (0, 2)")
    sigma = gen.sigma
    gap = gen.spectral_gap()
    probes = mixing_probes(sigma.shape[0]) if probes is None else probes
    t_cap = 1e3 / gap
    times, converged = [], True
    for p in probes:
        t = hitting_time(lambda s: trace_norm(gen.evolve(p, s) - sigma), epsilon, 1.0 / gap, t_cap, tol)
        if t is None:
            converged = False
            t = float("inf")
        times.append(float(t))
    t_max = max(times, default=0.0)
    grid = np.linspace(0.0, t_max if np.isfinite(t_max) and t_max > 0 else 1.0 / gap, samples)
    traj = [[(float(s), trace_norm(gen.evolve(p, s) - sigma)) for s in grid] for p in probes]
    return MixingReport(float(epsilon), times, float(t_max), traj, converged)


def rapid_mixing_bound(alpha_hat: float, D0_max: float, epsilon: float) -> float:
    """Time after which ``||rho_t - sigma||_1 <= epsilon`` is guaranteed.

    Uses ``D_t <= exp(-2 alpha t) D_0`` and Pinsker ``||rho - sigma||_1 <= sqrt(2 D)``.
    """
    if alpha_hat <= 0:
        raise ValueError("alpha_hat must be positive")
    return max(0.0, float(np.log(2.0 * D0_max / epsilon**2) / (2.0 * alpha_hat)))


def max_relative_entropy_bound(sigma) -> float:
    """``ln(1 / lambda_min(sigma))``, the largest ``D(rho||sigma)`` over states."""
    return float(-np.log(np.linalg.eigvalsh(sigma)[0]))


# --------------------------------------------------------------------------
# MLSI
# --------------------------------------------------------------------------

def mlsi_ratio(gen: DaviesGenerator, rho, sigma=None) -> float | None:
    """``EP(rho) / (2 D(rho||sigma))``, or ``None`` when ``D`` is below ``D_MIN``."""
    sigma = gen.sigma if sigma is None else sigma
    d = rel_entropy(rho, sigma).value
    if d < D_MIN:
        return None
    return entropy_production(gen, rho, sigma).value / (2.0 * d)


def mlsi_probes(sigma, count: int, seed=0) -> list[tuple[str, np.ndarray]]:
    """Haar pure states mixed with ``sigma`` plus floored basis states."""
    rng = rng_from(seed)
    dim = sigma.shape[0]
    out = []
    for k in range(count):
        psi = pure_density(haar_pure(dim, rng))
        for w in MIX_WEIGHTS:
            out.append((f"haar{k}-w{w}", (1 - w) * psi + w * sigma))
    for k in range(dim):
        out.append((f"basis{k}", (1 - BASIS_FLOOR) * basis_density(dim, k) + BASIS_FLOOR * sigma))
    return out


def _state_from(g: np.ndarray) -> np.ndarray:
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def descend_ratio(gen: DaviesGenerator, rho0, steps: int = 200, directions: int = 16, seed=0,
                  fd_step: float = 1e-5) -> tuple[float, np.ndarray]:
    """Lower the EP/(2D) ratio from ``rho0`` over ``rho = G G^+ / tr``.

    The gradient is estimated by central differences inside a random
    ``directions``-dimensional subspace of the ``2 d^2`` real parameters,
    followed by a backtracking line search.
    """
    rng = rng_from(seed)
    sigma = gen.sigma
    dim = sigma.shape[0]

    def f(g):
        r = mlsi_ratio(gen, _state_from(g), sigma)
        return np.inf if r is None else r

    g = powm_h(rho0, 0.5).astype(complex)
    best = f(g)
    step = 0.1 * np.linalg.norm(g)
    for _ in range(steps):
        k = min(directions, 2 * dim * dim)
        basis = rng.normal(size=(k, dim, dim)) + 1j * rng.normal(size=(k, dim, dim))
        basis /= np.linalg.norm(basis.reshape(k, -1), axis=1)[:, None, None]
        h = fd_step * np.linalg.norm(g)
        grad = np.zeros_like(g)
        for b in basis:
            fp, fm = f(g + h * b), f(g - h * b)
            if np.isfinite(fp) and np.isfinite(fm):
                grad += (fp - fm) / (2 * h) * b
        gn = np.linalg.norm(grad)
        if gn == 0:
            break
        direction = grad / gn
        improved = False
        for _ in range(20):
            cand = g - step * direction
            val = f(cand)
            if val < best:
                g, best, improved = cand, val, True
                step *= 2.0
                break
            step *= 0.5
        if not improved:
            break
    return float(best), _state_from(g)


def _decay_fit(times: np.ndarray, values: np.ndarray, burn_in: float = 0.1) -> float:
    """``-slope/2`` of ``ln values`` after discarding the first ``burn_in`` fraction."""
    keep = values > D_MIN
    t, v = times[keep], values[keep]
    start = int(np.ceil(burn_in * t.size))
    t, v = t[start:], v[start:]
    if t.size < 2:
        return float("nan")
    slope = np.polyfit(t, np.log(v), 1)[0]
    return float(-slope / 2.0)


@dataclass
class MLSIReport:
    """Probe-set estimate of the MLSI constant (an upper bound on the true one)."""

    alpha_hat: float
    minimizer: str
    decay_rate_fit: float
    gap: float
    alpha0_site: float | None
    K_hat: float | None = None
    n_probes: int = 0
    skipped: list[str] = field(default_factory=list)
    ratios: dict = field(default_factory=dict, repr=False)
    minimizer_state: np.ndarray | None = field(default=None, repr=False)
    probe_states: list = field(default_factory=list, repr=False)
    trajectories: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"alpha_hat": self.alpha_hat, "minimizer": self.minimizer, "decay_rate_fit": self.decay_rate_fit,
                "gap": self.gap, "alpha0_site": self.alpha0_site, "K_hat": self.K_hat,
                "n_probes": self.n_probes, "skipped": self.skipped}


def decay_trajectory(gen: DaviesGenerator, rho0, t_end: float, samples: int = 40):
    """``(t, D(exp(tL) rho0 || sigma), state)`` on a uniform grid."""
    sigma = gen.sigma
    out = []
    for t in np.linspace(0.0, t_end, samples):
        r = gen.evolve(rho0, t)
        r = (r + r.conj().T) / 2
        out.append((float(t), rel_entropy(r, sigma).value, r))
    return out


def site_constants(gen: DaviesGenerator, states: Sequence[np.ndarray],
                   E_sites: dict[int, ConditionalExpectation] | None = None) -> tuple[float | None, float | None]:
    """``alpha0 = min EP_x/(2 DD_x)`` and ``K = max D / sum_x DD_x`` over ``states``.

    ``DD_x(rho) = D(rho || E_x(rho))``.  Terms with ``DD_x`` below ``D_MIN``
    are skipped in the minimum.
    """
    sigma = gen.sigma
    E_sites = E_sites or {x: conditional_expectation(gen, [x]) for x in gen.region}
    alpha0, K = None, None
    for rho in states:
        total = 0.0
        for x, E in E_sites.items():
            dd = cond_rel_entropy_EA(rho, E).value
            total += max(dd, 0.0)
            if dd >= D_MIN:
                r = entropy_production(gen, rho, sigma, region=[x]).value / (2.0 * dd)
                alpha0 = r if alpha0 is None else min(alpha0, r)
        d = rel_entropy(rho, sigma).value
        if d >= D_MIN and total > 0:
            K = d / total if K is None else max(K, d / total)
    return alpha0, K


def mlsi_estimate(gen: DaviesGenerator, probe_count: int = 10, steps: int = 200, restarts: int = 10,
                  n_trajectories: int = 5, directions: int = 16, seed=0, site_constants_too: bool = True,
                  traj_samples: int = 40) -> MLSIReport:
    """Estimate ``alpha_hat = min EP/(2D)`` over probes, descent refinements and trajectory states."""
    rng = rng_from(seed)
    sigma = gen.sigma
    gap = gen.spectral_gap()
    probes = mlsi_probes(sigma, probe_count, rng)
    ratios, skipped = {}, []
    for name, rho in probes:
        r = mlsi_ratio(gen, rho, sigma)
        if r is None:
            skipped.append(name)
        else:
            ratios[name] = (r, rho)
    ranked = sorted(ratios, key=lambda k: ratios[k][0])
    for i, name in enumerate(ranked[:restarts]):
        if steps <= 0:
            break
        val, rho = descend_ratio(gen, ratios[name][1], steps, directions, rng)
        if np.isfinite(val):
            ratios[f"descent{i}:{name}"] = (val, rho)

    # trajectory states join the probe set so alpha_hat certifies their decay
    t_end = np.log(1e6) / (2.0 * gap)
    trajectories, fits = [], []
    for name in ranked[:n_trajectories]:
        traj = decay_trajectory(gen, ratios[name][1], t_end, traj_samples)
        trajectories.append((name, [(t, d) for t, d, _ in traj]))
        fits.append(_decay_fit(np.array([t for t, _, _ in traj]), np.array([d for _, d, _ in traj])))
        for k, (t, d, r) in enumerate(traj):
            if d >= D_MIN:
                ratio = mlsi_ratio(gen, r, sigma)
                if ratio is not None:
                    ratios[f"traj:{name}:{k}"] = (ratio, r)
    best = min(ratios, key=lambda k: ratios[k][0])
    fits = [f for f in fits if np.isfinite(f)]
    states = [rho for _, rho in ratios.values()]
    alpha0, K = site_constants(gen, states) if site_constants_too else (None, None)
    return MLSIReport(
        alpha_hat=float(ratios[best][0]), minimizer=best,
        decay_rate_fit=float(min(fits)) if fits else float("nan"), gap=float(gap),
        alpha0_site=alpha0, K_hat=K, n_probes=len(ratios), skipped=skipped,
        ratios={k: v[0] for k, v in ratios.items()}, minimizer_state=ratios[best][1],
        probe_states=states, trajectories=trajectories,
    )


# --------------------------------------------------------------------------
# scaling fits
# --------------------------------------------------------------------------

@dataclass
class LogFit:
    a: float
    b: float
    max_rel_residual: float


def fit_log_scaling(ns: Sequence[int], values: Sequence[float]) -> LogFit:
    """Least squares ``values ~ a ln n + b`` with the worst relative residual."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.asarray(values, dtype=float)
    a, b = np.polyfit(x, y, 1)
    resid = np.abs(y - (a * x + b)) / np.abs(y)
    return LogFit(float(a), float(b), float(resid.max()))


def relative_spread(values: Sequence[float]) -> float:
    """``max |v - mean| / mean``."""
    v = np.asarray(values, dtype=float)
    m = v.mean()
    return float(np.max(np.abs(v - m)) / abs(m))
