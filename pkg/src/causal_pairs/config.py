"""Config files for the command-line tool.

A config is a YAML mapping with one optional section per command::

    generate:
      dataset: csuite_2
      n: 2000
      seed: 1
    run:
      datasets: [csuite_1, csuite_2, csuite_3]
      scheme: logistic
      sigma2_beta: [1, 5, 10]
      sigma2_nu: [0.05, 0.1, 0.2]
      replications: 100
      seed: 0
    validate:
      dataset: csuite_1
      sigma2_nu: 0.1

Unknown sections and keys are errors.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import os
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .estimators import CAUSAL_ERROR_METHODS
from .evaluation import DEFAULT_ESTIMATORS, ExperimentConfig

SEED_ENV = "CAUSAL_EVAL_SEED"

GENERATE_DEFAULTS = {"dataset": None, "n": 2000, "seed": 0, "dataset_params": {}}
RUN_DEFAULTS = {
    "datasets": ["csuite_1", "csuite_2", "csuite_3"],
    "n": 2000,
    "scheme": "logistic",
    "sigma2_beta": [1.0, 5.0, 10.0],
    "subsample_m": [500, 1000, 2000],
    "sigma2_nu": [0.05, 0.1, 0.2],
    "replications": 100,
    "seed": 0,
    "estimators": list(DEFAULT_ESTIMATORS),
    "model": "hypothetical",
    "clip": 1e-3,
    "options": {},
    "dataset_params": {},
}
RUN_OPTIONS = {"freeze_beta", "redraw_nu", "bessel", "noise_distribution", "per_arm_noise"}
VALIDATE_DEFAULTS = {
    "dataset": "csuite_1",
    "n": 2000,
    "sigma2_nu": 0.1,
    "sigma2_beta": 5.0,
    "seed": 0,
    "degree": 1,
    "model": "hypothetical",
    "per_arm": False,
    "dataset_params": {},
}
SECTIONS = {"generate": GENERATE_DEFAULTS, "run": RUN_DEFAULTS, "validate": VALIDATE_DEFAULTS}


def load_file(path) -> dict:
    """Parse a config file; I/O problems propagate as ``OSError``."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    unknown = set(data) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}; expected {sorted(SECTIONS)}")
    return data


def resolve(section: str, file_data: Mapping | None, overrides: Mapping[str, Any]) -> dict:
    """Defaults, then the file section, then the seed env var, then explicit overrides."""
    defaults = SECTIONS[section]
    given = dict((file_data or {}).get(section) or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    out = {**defaults, **given}
    if section == "run":
        bad = set(out["options"] or {}) - RUN_OPTIONS
        if bad:
            raise ConfigError(f"unknown run options: {sorted(bad)}")
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            out["seed"] = int(env_seed)
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env_seed!r}") from exc
    out.update({k: v for k, v in overrides.items() if v is not None})
    return out


def config_hash(resolved: Mapping) -> str:
    """SHA-256 of the canonical JSON form; independent of key order."""
    canonical = json.dumps(resolved, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def expand_grid(run: Mapping) -> list[ExperimentConfig]:
    """Cartesian product of datasets x scheme parameter x sigma2_nu."""
    datasets = _as_list(run["datasets"])
    scheme = run["scheme"]
    if scheme == "logistic":
        params = [("sigma2_beta", float(v)) for v in _as_list(run["sigma2_beta"])]
    elif scheme == "subsample":
        params = [("subsample_m", int(v)) for v in _as_list(run["subsample_m"])]
    elif scheme == "rct":
        params = [(None, None)]
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    nus = [float(v) for v in _as_list(run["sigma2_nu"])]
    if run["model"] == "t_learner":
        nus = [0.0]
    estimators = tuple(_as_list(run["estimators"]))
    bad = [e for e in estimators if e not in CAUSAL_ERROR_METHODS]
    if bad:
        raise ConfigError(f"unknown estimators {bad}; valid: {', '.join(CAUSAL_ERROR_METHODS)}")
    options = dict(run["options"] or {})
    configs = []
    for dataset, (pname, pval), nu in itertools.product(datasets, params, nus):
        kw = {pname: pval} if pname else {}
        configs.append(
            ExperimentConfig(
                dataset=dataset,
                n=int(run["n"]),
                scheme=scheme,
                sigma2_nu=nu,
                replications=int(run["replications"]),
                base_seed=int(run["seed"]),
                estimators=estimators,
                model=run["model"],
                clip=float(run["clip"]),
                dataset_params=dict(run["dataset_params"] or {}) if dataset.startswith("dgp") else {},
                **kw,
                **options,
            )
        )
    if not configs:
        raise ConfigError("the experiment grid is empty")
    return configs
