"""Experiment pipelines and deterministic writers for CSV/JSON outputs.

Each experiment returns an :class:`ExperimentResult`: tidy rows
``(model, n, beta, rate_fn, quantity, value, slack)``, JSON-able reports,
extra data files, warnings and hard failures.  :func:`write_outputs`
serializes them; only ``timings.json`` depends on wall-clock time.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .condexp import conditional_expectation, detectability as detectability_report
from .config import ExperimentConfig
from .davies import check_covariance, davies_generator, jumps_from_spec, pauli_jumps, strong_symmetry_witness
from .geometry import GeometryError, build_geometry, two_block_geometry
from .gibbs import OVERLAP_CSV_COLUMNS, gibbs_state, overlap_decay_scan, overlap_rows_to_csv
from .mixing import (fit_log_scaling, max_relative_entropy_bound, mixing_probes, mixing_time_estimate,
                     mlsi_estimate, rapid_mixing_bound, relative_spread)
from .models import cluster_mps_state, from_config, z2z2_representation
from .quasifact import qf_verify_combined, qf_verify_global, qf_verify_local
from .states import random_density, task_seed

TIDY_COLUMNS = ("model", "n", "beta", "rate_fn", "quantity", "value", "slack")
PLOT_COLUMNS = ("experiment", "n", "quantity", "value")


class InfeasibleError(ValueError):
    """Configuration cannot be run (geometry, parity or size precondition)."""


@dataclass
class ExperimentResult:
    rows: list[tuple] = field(default_factory=list)
    reports: dict = field(default_factory=dict)
    files: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)

    def add(self, cfg: ExperimentConfig, n, beta, quantity, value, slack=None):
        self.rows.append((cfg.model, n, beta, cfg.rate_fn, quantity, value, slack))


# --------------------------------------------------------------------------
# formatting
# --------------------------------------------------------------------------

def fmt(x) -> str:
    """Floats with 17 significant digits; ints and strings unchanged; None empty."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def jsonable(x):
    if isinstance(x, dict):
        return {str(k): jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    if isinstance(x, complex):
        return {"re": jsonable(x.real), "im": jsonable(x.imag)}
    return x


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def build_generator(cfg: ExperimentConfig, n: int, beta: float):
    h = from_config(cfg.model_config(n))
    if isinstance(cfg.jumps, str):
        jumps = pauli_jumps(n, paulis=cfg.jumps)
    else:
        jumps = jumps_from_spec(n, [tuple(j) for j in cfg.jumps])
    return h, davies_generator(h, beta, jumps, cfg.rate_fn)


def _geometry(cfg: ExperimentConfig, n: int, overlap: int | None = None):
    w = cfg.geometry["overlap"] if overlap is None else overlap
    try:
        if cfg.geometry["kind"] == "two-block":
            return two_block_geometry(n, w, cfg.boundary)
        return build_geometry(n, cfg.geometry["length"], w, cfg.boundary)
    except GeometryError as exc:
        raise InfeasibleError(str(exc)) from None


def _grid(cfg: ExperimentConfig):
    k = 0
    for n in cfg.n_list:
        for beta in cfg.beta_list:
            yield k, n, beta
            k += 1


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def run_gibbs(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    table = []
    for _, n, beta in _grid(cfg):
        s = gibbs_state(from_config(cfg.model_config(n)), beta)
        diag = np.real(np.diag(s.state))
        for i, p in enumerate(diag):
            table.append((cfg.model, n, beta, i, float(p)))
        res.add(cfg, n, beta, "log_partition", s.log_partition)
        res.add(cfg, n, beta, "min_eigenvalue", float(np.linalg.eigvalsh(s.state)[0]))
    res.files["gibbs.csv"] = to_csv(("model", "n", "beta", "index", "sigma_diag"), table)
    return res


def run_davies_check(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    tol = cfg.tolerances
    for k, n, beta in _grid(cfg):
        h, gen = build_generator(cfg, n, beta)
        fp = gen.fixed_point_residual()
        db = gen.check_detailed_balance()
        res.add(cfg, n, beta, "fixed_point_residual", fp, tol["fixed_point"] - fp)
        res.add(cfg, n, beta, "detailed_balance_residual", db, tol["detailed_balance"] - db)
        if fp > tol["fixed_point"]:
            res.failures.append(f"n={n} beta={beta}: fixed-point residual {fp:.3e}")
        if db > tol["detailed_balance"]:
            res.failures.append(f"n={n} beta={beta}: detailed-balance residual {db:.3e}")
        ergodic, kdim = gen.check_ergodic(tol["kernel"])
        res.add(cfg, n, beta, "kernel_dim", kdim)
        if ergodic:
            res.add(cfg, n, beta, "gap", gen.spectral_gap(tol["kernel"]))
        else:
            res.warnings.append(f"n={n} beta={beta}: generator not ergodic (kernel dimension {kdim})")
        report = {"n": n, "beta": beta, "fixed_point_residual": fp, "detailed_balance_residual": db,
                  "kernel_dim": kdim}
        if cfg.model == "cluster" and n % 2 == 0 and cfg.boundary == "periodic":
            probes = mixing_probes(gen.structure.dim, cfg.probe_count, task_seed(cfg.seed, k))
            cov = check_covariance(gen, z2z2_representation(n), probes, tol["covariance"])
            for c in cov:
                res.add(cfg, n, beta, f"covariance_{c.element}", c.residual, tol["covariance"] - c.residual)
                if not c.passed:
                    res.failures.append(f"n={n} beta={beta}: covariance {c.element} residual {c.residual:.3e}")
            report["covariance"] = {c.element: {"residual": c.residual, "passed": c.passed} for c in cov}
        res.reports[f"n{n}_beta{fmt(beta)}"] = report
    return res


def _mlsi(cfg: ExperimentConfig, gen, seed):
    m = cfg.mlsi
    return mlsi_estimate(gen, probe_count=m["probe_count"], steps=m["steps"], restarts=m["restarts"],
                         n_trajectories=m["trajectories"], directions=m["directions"], seed=seed)


def run_mixing_scan(cfg: ExperimentConfig, with_mixing: bool = True) -> ExperimentResult:
    res = ExperimentResult()
    per_beta: dict[float, list] = {}
    traj_rows = []
    for k, n, beta in _grid(cfg):
        _, gen = build_generator(cfg, n, beta)
        t0 = time.perf_counter()
        gap = gen.spectral_gap(cfg.tolerances["kernel"])
        ml = _mlsi(cfg, gen, task_seed(cfg.seed, 2 * k))
        row = {"n": n, "beta": beta, "gap": gap, **ml.to_dict()}
        res.add(cfg, n, beta, "gap", gap)
        res.add(cfg, n, beta, "alpha_hat", ml.alpha_hat)
        res.add(cfg, n, beta, "alpha_hat_ln_n", ml.alpha_hat * np.log(n))
        res.add(cfg, n, beta, "decay_rate_fit", ml.decay_rate_fit,
                None if not np.isfinite(ml.decay_rate_fit) else 1.05 * ml.decay_rate_fit - ml.alpha_hat)
        res.add(cfg, n, beta, "alpha0_site", ml.alpha0_site)
        res.add(cfg, n, beta, "K_hat", ml.K_hat)
        if ml.skipped:
            res.warnings.append(f"n={n} beta={beta}: {len(ml.skipped)} MLSI probes skipped (D below floor)")
        if with_mixing:
            probes = mixing_probes(gen.structure.dim, cfg.probe_count, task_seed(cfg.seed, 2 * k + 1))
            mix = mixing_time_estimate(gen, cfg.epsilon, probes)
            bound = rapid_mixing_bound(ml.alpha_hat, max_relative_entropy_bound(gen.sigma), cfg.epsilon)
            res.add(cfg, n, beta, "t_mix", mix.t_mix_lower_estimate)
            res.add(cfg, n, beta, "t_bound", bound, bound - mix.t_mix_lower_estimate)
            if bound < mix.t_mix_lower_estimate:
                res.warnings.append(f"n={n} beta={beta}: Pinsker bound {bound:.4g} below measured t_mix "
                                    f"{mix.t_mix_lower_estimate:.4g}")
            if not mix.converged:
                res.warnings.append(f"n={n} beta={beta}: some probes did not mix before t_cap")
            row.update(t_mix=mix.t_mix_lower_estimate, t_bound=bound, epsilon=cfg.epsilon)
            traj_rows += [(n, beta, i, t, d) for i, tr in enumerate(mix.trajectories) for t, d in tr]
        res.timings[f"n{n}_beta{fmt(beta)}"] = time.perf_counter() - t0
        res.reports[f"n{n}_beta{fmt(beta)}"] = row
        per_beta.setdefault(beta, []).append(row)
    if with_mixing:
        res.files["trajectories.csv"] = to_csv(("n", "beta", "probe", "t", "trace_distance"), traj_rows)
    summary = {}
    for beta, rows in per_beta.items():
        ns = [r["n"] for r in rows]
        s = {"gap_relative_spread": relative_spread([r["gap"] for r in rows])}
        s["alpha_hat_ln_n_ratio_to_first"] = [r["alpha_hat"] * np.log(r["n"]) /
                                              (rows[0]["alpha_hat"] * np.log(rows[0]["n"])) for r in rows]
        if with_mixing and len(rows) >= 2:
            fit = fit_log_scaling(ns, [r["t_mix"] for r in rows])
            s.update(t_mix_fit_a=fit.a, t_mix_fit_b=fit.b, t_mix_fit_max_rel_residual=fit.max_rel_residual)
        summary[fmt(beta)] = s
    res.reports["summary"] = summary
    return res


def run_mlsi_scan(cfg: ExperimentConfig) -> ExperimentResult:
    return run_mixing_scan(cfg, with_mixing=False)


def run_qf_check(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    for k, n, beta in _grid(cfg):
        geo = _geometry(cfg, n)
        _, gen = build_generator(cfg, n, beta)
        rng = np.random.default_rng(task_seed(cfg.seed, k))
        probes = [random_density(gen.structure.dim, rng) for _ in range(cfg.probe_count)]
        ml = _mlsi(cfg, gen, task_seed(cfg.seed, 10_000 + k))
        regions = cfg.detectability.get("regions") or [geo.X_cover[0]]
        E_sites = {x: conditional_expectation(gen, [x]) for x in gen.region}
        reports = qf_verify_global(probes, gen.sigma, geo)
        for reg in regions:
            reports.append(qf_verify_local(probes, gen, reg, E_sites=E_sites))
        reports += qf_verify_combined(probes + [ml.minimizer_state], gen, geo, ml.alpha_hat, E_sites)
        out = []
        for r in reports:
            res.add(cfg, n, beta, f"qf_{r.kind}_constant", r.constant, r.slack if r.applicable else None)
            if r.applicable is False:
                res.warnings.append(f"n={n} beta={beta}: {r.kind} not applicable "
                                    f"(||h||={r.detail['h_infty_norm']:.4g} >= 1/2)")
            elif not r.passed:
                res.failures.append(f"n={n} beta={beta}: {r.kind} violated, slack {r.slack:.3e}")
            out.append(r.to_dict())
        res.reports[f"n{n}_beta{fmt(beta)}"] = out
    return res


def run_spt_check(cfg: ExperimentConfig) -> ExperimentResult:
    if cfg.model != "cluster":
        raise InfeasibleError("spt-check requires model=cluster")
    odd = [n for n in cfg.n_list if n % 2]
    if odd:
        raise InfeasibleError(f"spt-check needs even n (Z2 x Z2 blocking); got {odd}")
    res = ExperimentResult()
    tol = cfg.tolerances
    for k, n, beta in _grid(cfg):
        h, gen = build_generator(cfg, n, beta)
        w, v = np.linalg.eigh(h.total)
        overlap = float(abs(np.vdot(v[:, 0], cluster_mps_state(n))) ** 2)
        gs_gap = float(w[1] - w[0])
        rep = z2z2_representation(n)
        probes = mixing_probes(gen.structure.dim, cfg.probe_count, task_seed(cfg.seed, k))
        cov = check_covariance(gen, rep, probes, tol["covariance"])
        strong = strong_symmetry_witness(h, rep, beta, cfg.rate_fn, probes)
        gap = gen.spectral_gap(tol["kernel"])
        ml = _mlsi(cfg, gen, task_seed(cfg.seed, 1000 + k))
        mix = mixing_time_estimate(gen, cfg.epsilon, probes)
        checks = {
            "mps_overlap": overlap >= 1 - tol["mps_overlap"],
            "ground_state_unique": gs_gap > 1e-8,
            "covariance": all(c.passed for c in cov),
            "strong_symmetry_non_ergodic": strong.fixed_space_dim > 1,
            "weakly_symmetric_ergodic": gap > 0,
        }
        res.add(cfg, n, beta, "mps_overlap", overlap, overlap - (1 - tol["mps_overlap"]))
        for c in cov:
            res.add(cfg, n, beta, f"covariance_{c.element}", c.residual, tol["covariance"] - c.residual)
        res.add(cfg, n, beta, "strong_fixed_space_dim", strong.fixed_space_dim)
        res.add(cfg, n, beta, "gap", gap)
        res.add(cfg, n, beta, "alpha_hat", ml.alpha_hat)
        res.add(cfg, n, beta, "t_mix", mix.t_mix_lower_estimate)
        for name, ok in checks.items():
            if not ok:
                res.failures.append(f"n={n} beta={beta}: spt check {name} failed")
        res.reports[f"n{n}_beta{fmt(beta)}"] = {
            "pass": all(checks.values()), "checks": checks, "mps_overlap": overlap,
            "covariance": {c.element: c.residual for c in cov},
            "strong_symmetry": {"fixed_space_dim": strong.fixed_space_dim, "n_jumps": strong.n_jumps,
                                "invariance_residual": strong.invariance_residual,
                                "note": "non-ergodic, as predicted for strongly symmetric baths"},
            "gap": gap, "alpha_hat": ml.alpha_hat, "t_mix": mix.t_mix_lower_estimate,
        }
    return res


def run_overlap_scan(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    widths = cfg.geometry.get("overlap_list") or [cfg.geometry["overlap"]]
    rows = []
    for _, n, beta in _grid(cfg):
        s = gibbs_state(from_config(cfg.model_config(n)), beta)
        geos = [_geometry(cfg, n, w) for w in widths]
        scan = overlap_decay_scan([s] * len(geos), geos)
        rows += scan
        for r in scan:
            res.add(cfg, n, beta, f"h_infty_norm_w{r.overlap_width}", r.h_infty_norm)
            if r.qf_constant is None:
                res.warnings.append(f"n={n} beta={beta} w={r.overlap_width}: ||h||={r.h_infty_norm:.4g} inadmissible")
    buf = io.StringIO()
    overlap_rows_to_csv(rows, buf)
    res.files["overlap.csv"] = buf.getvalue()
    return res


def run_detectability(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult()
    for _, n, beta in _grid(cfg):
        _, gen = build_generator(cfg, n, beta)
        regions = cfg.detectability.get("regions") or [[(n // 2 - 1 + j) % n for j in range(3)]]
        for reg in regions:
            bad = [x for x in reg if not 0 <= x < n]
            if bad:
                raise InfeasibleError(f"region sites {bad} outside the chain of {n} sites")
            label = "-".join(map(str, sorted(reg)))
            for order in ("ascending", "descending"):
                rep = detectability_report(gen, reg, cfg.detectability["k_max"], order)
                res.add(cfg, n, beta, f"lambda_{order}_X{label}", rep.lam, 1.0 - rep.lam)
                res.add(cfg, n, beta, f"k_star_{order}_X{label}", rep.k_star)
                if not rep.passed:
                    res.warnings.append(f"n={n} beta={beta} X={label}: lambda={rep.lam:.4g} >= 1")
                res.reports[f"n{n}_beta{fmt(beta)}_X{label}_{order}"] = rep.to_dict()
    return res


EXPERIMENTS = {
    "gibbs": run_gibbs,
    "davies-check": run_davies_check,
    "mixing-scan": run_mixing_scan,
    "mlsi-scan": run_mlsi_scan,
    "qf-check": run_qf_check,
    "spt-check": run_spt_check,
    "overlap-scan": run_overlap_scan,
    "detectability": run_detectability,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    res = EXPERIMENTS[cfg.experiment](cfg)
    res.timings["total"] = time.perf_counter() - t0
    return res


# --------------------------------------------------------------------------
# plot data
# --------------------------------------------------------------------------

def _dat(pairs) -> str:
    lines = [f"{fmt(x)} {fmt(y)}" for x, y in sorted(pairs)]
    return "".join(line + "\n" for line in lines)


def emit_plot_data(results: dict[str, ExperimentResult]) -> dict[str, str]:
    """Tidy ``plot_data.csv`` plus two-column ``.dat`` files per scan.

    ``results`` maps experiment names to their results.  Figures:
    ``alpha_ln_n.dat`` (n, alpha_hat ln n), ``tmix_vs_ln_n.dat``
    (ln n, t_mix) and ``h_vs_overlap.dat`` (w, ||h||).
    """
    tidy, alpha, tmix, hw = [], [], [], []
    for name in sorted(results):
        for model, n, beta, rate, quantity, value, _ in results[name].rows:
            if value is None:
                continue
            tidy.append((name, n, quantity, value))
            if quantity == "alpha_hat_ln_n":
                alpha.append((n, value))
            elif quantity == "t_mix" and name == "mixing-scan":
                tmix.append((math.log(n), value))
            elif quantity.startswith("h_infty_norm_w"):
                hw.append((int(quantity.rsplit("w", 1)[1]), value))
    return {
        "plot_data.csv": to_csv(PLOT_COLUMNS, tidy),
        "alpha_ln_n.dat": "# n alpha_hat*ln(n)\n" + _dat(alpha),
        "tmix_vs_ln_n.dat": "# ln(n) t_mix\n" + _dat(tmix),
        "h_vs_overlap.dat": "# overlap_width h_infty_norm\n" + _dat(hw),
    }


# --------------------------------------------------------------------------
# writing
# --------------------------------------------------------------------------

def versions() -> dict:
    return {"daviesmix": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_outputs(cfg: ExperimentConfig, res: ExperimentResult, out_dir: str | Path) -> dict:
    """Write data files, ``report.json``, ``manifest.json`` and ``timings.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"results.csv": to_csv(TIDY_COLUMNS, res.rows), "report.json": dumps(res.reports)}
    files.update(res.files)
    files.update(emit_plot_data({cfg.experiment: res}))
    if cfg.output.get("format") == "json":
        files["results.json"] = dumps([dict(zip(TIDY_COLUMNS, r)) for r in res.rows])
    digests = {}
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        digests[name] = hashlib.sha256(data).hexdigest()
    manifest = {
        "config": cfg.raw, "seed": cfg.seed, "experiment": cfg.experiment, "versions": versions(),
        "files": digests, "warnings": res.warnings, "failures": res.failures,
        "stages": sorted(res.timings), "timings_file": "timings.json",
    }
    (out / "manifest.json").write_bytes(dumps(manifest).encode())
    (out / "timings.json").write_bytes(dumps(res.timings).encode())
    return manifest
