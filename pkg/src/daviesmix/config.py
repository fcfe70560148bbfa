"""Experiment configuration: JSON schema validation and defaults."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

DEFAULT_TOLERANCES = {
    "fixed_point": 1e-10,
    "detailed_balance": 1e-10,
    "covariance": 1e-10,
    "kernel": 1e-8,
    "qf_slack": 1e-9,
    "mps_overlap": 1e-10,
}
DEFAULT_MLSI = {"probe_count": 10, "steps": 200, "restarts": 10, "directions": 16, "trajectories": 5}

SUPEROPERATOR_EXPERIMENTS = {"davies-check", "mixing-scan", "mlsi-scan", "qf-check", "spt-check", "detectability"}
MAX_N_SUPEROPERATOR = 7
MAX_N_STATE = 11


class ConfigError(ValueError):
    """Configuration violates the schema."""


def schema() -> dict:
    return json.loads(resources.files("daviesmix").joinpath("config_schema.json").read_text())


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict
    experiment: str
    model: str
    params: dict
    n_list: tuple[int, ...]
    beta_list: tuple[float, ...]
    boundary: str
    rate_fn: str
    jumps: object
    epsilon: float
    seed: int
    probe_count: int
    geometry: dict
    mlsi: dict
    detectability: dict
    output: dict
    tolerances: dict = field(default_factory=dict)

    def model_config(self, n: int) -> dict:
        return {"model": self.model, "n": n, "boundary": self.boundary, "params": self.params}


def validate(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {exc.message}") from None


def parse(cfg: dict, seed: int | None = None) -> ExperimentConfig:
    """Validate ``cfg`` and fill defaults; ``seed`` overrides the config seed."""
    validate(cfg)
    n_list = tuple(cfg["n_list"]) if "n_list" in cfg else (cfg.get("n", 4),)
    beta_list = tuple(float(b) for b in cfg["beta_list"]) if "beta_list" in cfg else (float(cfg.get("beta", 1.0)),)
    base_seed = seed if seed is not None else cfg.get("seed", cfg.get("probes", {}).get("seed", 0))
    return ExperimentConfig(
        raw=cfg,
        experiment=cfg["experiment"],
        model=cfg["model"],
        params=dict(cfg.get("params", {})),
        n_list=n_list,
        beta_list=beta_list,
        boundary=cfg.get("boundary", "periodic"),
        rate_fn=cfg.get("rate_fn", "glauber"),
        jumps=cfg.get("jumps", "XYZ"),
        epsilon=float(cfg.get("epsilon", 0.1)),
        seed=int(base_seed),
        probe_count=int(cfg.get("probes", {}).get("count", 20)),
        geometry={"length": 3, "overlap": 1, "kind": "tiled", **cfg.get("geometry", {})},
        mlsi={**DEFAULT_MLSI, **cfg.get("mlsi", {})},
        detectability={"k_max": 25, **cfg.get("detectability", {})},
        output={"path": "out", "format": "csv", **cfg.get("output", {})},
        tolerances={**DEFAULT_TOLERANCES, **cfg.get("tolerances", {})},
    )


def load(path: str | Path, seed: int | None = None) -> ExperimentConfig:
    try:
        cfg = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    return parse(cfg, seed)


def size_guard(cfg: ExperimentConfig) -> str | None:
    """Message when the config exceeds the desk-scale limits, else None."""
    limit = MAX_N_SUPEROPERATOR if cfg.experiment in SUPEROPERATOR_EXPERIMENTS else MAX_N_STATE
    big = [n for n in cfg.n_list if n > limit]
    if big:
        return f"n={big} exceeds the limit {limit} for {cfg.experiment}; pass --force to override"
    return None
