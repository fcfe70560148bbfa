"""Acceptance checks, one PASS/FAIL line per criterion (see the terminal summary)."""
import filecmp
import gc
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import generator, hamiltonian
from daviesmix.cli import main as cli_main
from daviesmix.condexp import conditional_expectation, detectability, semigroup_limit_check
from daviesmix.davies import davies_generator
from daviesmix.entropy import cond_rel_entropy_DA, cond_rel_entropy_EA, entropy_production, rel_entropy
from daviesmix.geometry import build_geometry, two_block_geometry
from daviesmix.gibbs import gibbs_state, is_decreasing, overlap_operator
from daviesmix.mixing import (fit_log_scaling, mixing_probes, mixing_time_estimate, mlsi_estimate,
                              relative_spread)
from daviesmix.models import build_cluster, build_ising, cluster_mps_state, z2z2_representation
from daviesmix.davies import check_covariance, strong_symmetry_witness
from daviesmix.quasifact import qf_verify_combined, qf_verify_global, qf_verify_local
from daviesmix.states import X, Z, random_density
from daviesmix.tensor import SiteIndexing, embed_local, partial_trace, product_operator, trace_norm

GRID = [(m, n, b) for m in ("ising", "cluster") for n in (3, 4, 5, 6) for b in (0.2, 1.0, 3.0)]


def _ids(p):
    return "-".join(str(x) for x in p)


# -- 1, 2 -------------------------------------------------------------------

@pytest.mark.parametrize("model,n,beta", GRID, ids=[_ids(p) for p in GRID])
def test_c01_fixed_point_and_c02_detailed_balance(model, n, beta, criterion):
    t0 = time.perf_counter()
    gen = generator(model, n, beta)
    fp = gen.fixed_point_residual()
    db = gen.check_detailed_balance()
    elapsed = time.perf_counter() - t0
    tag = f"{model} n={n} beta={beta}"
    criterion(f"C1 fixed point [{tag}]", fp <= 1e-10 and elapsed <= 120, f"||L(sigma)||_1={fp:.2e} t={elapsed:.1f}s")
    criterion(f"C2 detailed balance [{tag}]", db <= 1e-10, f"residual={db:.2e}")


# -- 3 ----------------------------------------------------------------------

def test_c03_single_qubit_depolarizer(criterion):
    gen = davies_generator(Z, 0.0)
    gap = gen.spectral_gap()
    rho = np.diag([1.0, 0.0]).astype(complex)
    t_mix = mixing_time_estimate(gen, 0.1, [rho]).t_mix_lower_estimate
    sigma = np.eye(2) / 2
    probe = np.array([[0.7, 0.2 - 0.1j], [0.2 + 0.1j, 0.3]])
    err = max(trace_norm(gen.evolve(probe, t) - (sigma + np.exp(-2 * t) * (probe - sigma)))
              for t in (0.0, 0.1, 0.5, 1.0, 3.0))
    ok = abs(gap - 2) <= 1e-10 and abs(t_mix - np.log(10) / 2) <= 1e-3 and err <= 1e-10
    criterion("C3 single-qubit analytics", ok, f"gap={gap:.12f} t_mix={t_mix:.5f} evolve_err={err:.1e}")


# -- 4 ----------------------------------------------------------------------

def _central_derivative(gen, rho, h=1e-5):
    s = gen.sigma
    d = [rel_entropy(gen.sectors.evolve(rho, t), s).value for t in (-h, h)]
    return (d[1] - d[0]) / (2 * h)


def test_c04_entropy_machinery(criterion, rng):
    d = rel_entropy(np.diag([1.0, 0.0]), np.eye(2) / 2).value
    ok_d = abs(d - np.log(2)) <= 1e-12

    fd_err = 0.0
    dep = davies_generator(Z, 0.0)
    cases = [(dep, np.diag([0.9, 0.1]).astype(complex))]
    for model in ("ising", "cluster"):
        g = generator(model, 3, 1.0)
        # mixing with sigma keeps the spectrum away from 0, where the third derivative blows up
        cases += [(g, 0.5 * random_density(8, rng) + 0.5 * g.sigma) for _ in range(3)]
    for g, rho in cases:
        fd_err = max(fd_err, abs(_central_derivative(g, rho) + entropy_production(g, rho).value))

    add_err = 0.0
    g4 = generator("ising", 4, 1.0)
    for _ in range(10):
        rho = random_density(16, rng)
        for a, b in (([0], [2]), ([0, 1], [2, 3]), ([1], [3, 0])):
            whole = entropy_production(g4, rho, region=a + b).value
            parts = entropy_production(g4, rho, region=a).value + entropy_production(g4, rho, region=b).value
            add_err = max(add_err, abs(whole - parts))

    regions = [[0], [1], [0, 1], [1, 2], [0, 2], [0, 1, 2]]
    E = {tuple(r): conditional_expectation(g4, r) for r in regions}
    worst = np.inf
    for k in range(200):
        r = regions[k % len(regions)]
        rho = random_density(16, rng, rank=int(rng.integers(1, 17)))
        rho = 0.999 * rho + 0.001 * g4.sigma
        gap = cond_rel_entropy_EA(rho, E[tuple(r)]).value - cond_rel_entropy_DA(rho, g4.sigma, r).value
        worst = min(worst, gap)
    ok = ok_d and fd_err <= 1e-6 and add_err <= 1e-12 and worst >= -1e-10
    criterion("C4 entropy machinery", ok,
              f"D-ln2={d - np.log(2):.1e} fd_err={fd_err:.1e} additivity={add_err:.1e} min(DD_A-D_A)={worst:.2e}")


# -- 5 ----------------------------------------------------------------------

def test_c05_conditional_expectations(criterion, rng):
    worst = 0.0
    for model, n, beta, region in (("ising", 3, 1.0, [0, 1]), ("cluster", 4, 1.0, [1, 2]),
                                   ("cluster", 4, 3.0, [0]), ("ising", 4, 0.2, [0, 2])):
        E = conditional_expectation(generator(model, n, beta), region)
        worst = max(worst, E.idempotence_residual(), E.sigma_residual(), E.selfadjoint_residual())

    limit = 0.0
    for model, n, region in (("ising", 3, [0, 1]), ("cluster", 4, [1, 2])):
        g = generator(model, n, 1.0)
        E = conditional_expectation(g, region)
        gap_a = np.min(np.abs(ev := g.restrict(region).sectors.eigenvalues())[np.abs(ev) > 1e-8])
        limit = max(limit, semigroup_limit_check(g, E, [50.0 / gap_a], region).final)

    n = 3
    free = davies_generator(build_ising(n, J=0.0), 0.0)
    idx = SiteIndexing(n)
    pinch = 0.0
    for x in range(n):
        E = conditional_expectation(free, [x])
        rest = [s for s in range(n) if s != x]
        for _ in range(5):
            rho = random_density(2**n, rng)
            # product_operator reads factors in kron order: reversed site labels
            exact = product_operator([(partial_trace(rho, rest, idx), rest[::-1]), (np.eye(2) / 2, [x])], idx)
            pinch = max(pinch, np.max(np.abs(E(rho) - exact)))
    ok = worst <= 1e-10 and limit <= 1e-8 and pinch <= 1e-12
    criterion("C5 conditional expectations", ok,
              f"residuals={worst:.1e} semigroup_limit={limit:.1e} pinching={pinch:.1e}")


# -- 6 ----------------------------------------------------------------------

@pytest.mark.parametrize("model", ["ising", "cluster"])
def test_c06_quasi_factorization(model, criterion):
    rng = np.random.default_rng(606)
    gen = generator(model, 6, 1.0)
    geo = build_geometry(6, 3, 1)
    probes = [random_density(64, rng) for _ in range(50)]
    glob = qf_verify_global(probes, gen.sigma, geo)
    applicable = [r for r in glob if r.applicable]
    ok_glob = all(r.passed for r in applicable)
    E_sites = {x: conditional_expectation(gen, [x]) for x in range(6)}
    local = [qf_verify_local(probes, gen, reg, E_sites=E_sites) for reg in ([0, 1, 2], [2, 3, 4])]
    ok_local = all(np.isfinite(r.constant) for r in local)
    ml = mlsi_estimate(gen, probe_count=4, steps=15, restarts=2, directions=8, n_trajectories=2,
                       seed=6, site_constants_too=False)
    comb = qf_verify_combined(probes + [ml.minimizer_state], gen, geo, ml.alpha_hat, E_sites)
    chain = [r for r in comb if r.kind == "chain"][0]
    glob_note = ("||h||={:.3f} ".format(glob[0].detail["h_infty_norm"])
                 + ("min slack={:.3e}".format(min(r.slack for r in applicable)) if applicable
                    else "inadmissible, global checks not applicable"))
    detail = (f"{glob_note}; K_X={[round(r.constant, 4) for r in local]}; "
              f"alpha0/K={chain.lhs:.4f} alpha_hat={chain.rhs:.4f}")
    del gen, E_sites
    gc.collect()
    criterion(f"C6 quasi-factorization [{model} n=6 beta=1]", ok_glob and ok_local and chain.passed, detail)


# -- 7 ----------------------------------------------------------------------

def test_c07_overlap_decay(criterion):
    h = hamiltonian("ising", 10)
    widths = [1, 2, 3, 4]
    geos = [two_block_geometry(10, w) for w in widths]
    hot = gibbs_state(h, 1.0)
    norms = [overlap_operator(hot, g).h_infty_norm for g in geos]
    cold = gibbs_state(h, 0.0)
    zero = max(overlap_operator(cold, g).h_infty_norm for g in geos)
    ok = is_decreasing(norms, strict=True) and zero <= 1e-12
    criterion("C7 overlap decay", ok, f"||h||(w=1..4)={[round(v, 6) for v in norms]} beta=0 max={zero:.1e}")


# -- 8 ----------------------------------------------------------------------

DETECT = [(m, b, x) for m in ("ising", "cluster") for b in (0.2, 1.0, 3.0) for x in ([2, 3, 4],)]
DETECT += [(m, b, x) for m in ("ising", "cluster") for b in (1.0, 3.0) for x in ([2, 3], [3])]


@pytest.mark.parametrize("model,beta,region", DETECT, ids=[_ids((m, b, "".join(map(str, x)))) for m, b, x in DETECT])
def test_c08_detectability(model, beta, region, criterion):
    gen = generator(model, 6, beta)
    rep = detectability(gen, region, k_max=25)
    ok = rep.lam < 1 and rep.monotone and rep.k_star is not None and rep.k_star <= 25
    del gen
    gc.collect()
    criterion(f"C8 detectability [{model} n=6 beta={beta} X={region}]", ok,
              f"lambda={rep.lam:.4f} k_star={rep.k_star} last={rep.decay[-1]:.1e}")


# -- 9 ----------------------------------------------------------------------

@pytest.mark.parametrize("n", [4, 6])
def test_c09_spt(n, criterion):
    h = build_cluster(n)
    w, v = np.linalg.eigh(h.total)
    overlap = abs(np.vdot(v[:, 0], cluster_mps_state(n))) ** 2
    rep = z2z2_representation(n)
    gen = generator("cluster", n, 1.0)
    probes = mixing_probes(2**n, 10, seed=n)
    cov = max(c.residual for c in check_covariance(gen, rep, probes))
    strong = strong_symmetry_witness(h, rep, 1.0, probes=probes)
    ok = overlap >= 1 - 1e-10 and cov <= 1e-10 and strong.fixed_space_dim > 1
    criterion(f"C9 SPT [n={n}]", ok,
              f"mps_overlap=1-{1 - overlap:.1e} covariance={cov:.1e} strong_fixed_dim={strong.fixed_space_dim}")


# -- 10 ---------------------------------------------------------------------

@pytest.mark.parametrize("model", ["ising", "cluster"])
def test_c10_scaling(model, criterion):
    t0 = time.perf_counter()
    ns = [3, 4, 5, 6]
    gaps, alphas, tmix = [], [], []
    for n in ns:
        gen = generator(model, n, 1.0)
        gaps.append(gen.spectral_gap())
        ml = mlsi_estimate(gen, probe_count=5, steps=20, restarts=2, directions=8, n_trajectories=3,
                           seed=100 + n, site_constants_too=False)
        alphas.append(ml.alpha_hat)
        tmix.append(mixing_time_estimate(gen, 0.1, mixing_probes(2**n, 20, seed=n)).t_mix_lower_estimate)
        del gen
        gc.collect()
    elapsed = time.perf_counter() - t0
    spread = relative_spread(gaps)
    aln = np.array(alphas) * np.log(ns)
    fit = fit_log_scaling(ns, tmix)
    ok = spread <= 0.2 and np.all(aln >= 0.5 * aln[0]) and fit.max_rel_residual <= 0.15 and elapsed <= 1800
    criterion(f"C10 scaling [{model} beta=1]", ok,
              f"gap spread={spread:.3f} alpha*ln(n)/first={np.round(aln / aln[0], 3).tolist()} "
              f"t_mix fit a={fit.a:.3f} b={fit.b:.3f} resid={fit.max_rel_residual:.3f} t={elapsed:.0f}s")


# -- 11 ---------------------------------------------------------------------

def test_c11_determinism(tmp_path, criterion):
    cfg_dir = Path(__file__).resolve().parents[1] / "configs"
    same = True
    compared = 0
    for name in ("gibbs_ising_n3.json", "davies_check_cluster_n4.json", "mlsi_scan_cluster_quick.json",
                 "overlap_scan_ising_n10.json"):
        outs = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            assert cli_main(["run", str(cfg_dir / name), "--seed", "42", "--out", str(out)]) == 0
            outs.append(out)
        files = sorted(p.name for p in outs[0].iterdir() if p.name != "timings.json")
        match, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], files, shallow=False)
        same &= not mismatch and not errors
        compared += len(match)
    criterion("C11 determinism", same, f"{compared} files byte-identical across two runs")
