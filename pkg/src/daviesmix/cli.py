"""Command-line entry point.

    daviesmix run <config.json> [--seed S] [--out DIR] [--force]
    daviesmix validate <config.json>

Exit codes: 0 success, 1 a checked inequality or invariant was falsified,
2 schema violation, 3 infeasible configuration, 4 numerical failure.
``DAVIESMIX_THREADS`` sets the BLAS thread count.
"""
from __future__ import annotations

import os

_threads = os.environ.get("DAVIESMIX_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402

EXIT_OK = 0
EXIT_FALSIFIED = 1
EXIT_SCHEMA = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4

log = logging.getLogger("daviesmix")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="daviesmix", description="Davies-generator mixing experiments")
    sub = p.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--out", default=None, help="output directory (default: config output.path)")
    run.add_argument("--force", action="store_true", help="skip the desk-scale size guard")
    val = sub.add_parser("validate", help="validate a config against the schema")
    val.add_argument("config")
    return p


def main(argv=None) -> int:
    from .config import ConfigError, load, size_guard
    from .davies import KMSViolation
    from .experiments import InfeasibleError, run_experiment, write_outputs
    from .geometry import GeometryError
    from .models import NonCommutingError
    from .quasifact import QuasiFactorizationViolation
    from .sectors import KernelAmbiguityError, NonErgodicError
    from .tensor import EigenDecompositionError

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        cfg = load(args.config, getattr(args, "seed", None))
    except (ConfigError, OSError) as exc:
        log.error("invalid config: %s", exc)
        return EXIT_SCHEMA
    if args.command == "validate":
        log.info("config OK: experiment=%s model=%s", cfg.experiment, cfg.model)
        return EXIT_OK

    msg = size_guard(cfg)
    if msg and not args.force:
        log.error(msg)
        return EXIT_INFEASIBLE
    try:
        res = run_experiment(cfg)
    except (InfeasibleError, GeometryError, NonCommutingError) as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except QuasiFactorizationViolation as exc:
        log.error("falsified: %s", exc)
        return EXIT_FALSIFIED
    except (EigenDecompositionError, KernelAmbiguityError, NonErgodicError, KMSViolation,
            FloatingPointError, ValueError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    out = args.out or cfg.output["path"]
    manifest = write_outputs(cfg, res, out)
    for w in manifest["warnings"]:
        log.warning(w)
    for f in manifest["failures"]:
        log.error("check failed: %s", f)
    log.info("wrote %d files to %s", len(manifest["files"]) + 2, out)
    return EXIT_FALSIFIED if manifest["failures"] else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
