"""Replication harness: variance, bias and MSE of causal-error estimators.

One experiment fixes a unit pool and a model, then draws ``replications``
assignment plans and realizations.  Every replication is keyed by its own seed
(derived from ``base_seed`` and the replication number), so replications can be
evaluated in any order or in parallel; the moments are accumulated with
``math.fsum`` and are therefore independent of summation order.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy import stats

from . import estimators as est
from .assignment import DEFAULT_CLIP, draw_base_probabilities, logistic_probabilities
from .errors import ConfigError, ExperimentError
from .model_sim import ModelOutcomeTable, NoiseModel, apply_hypothetical_model, fit_t_learner, predict_outcomes
from .scm_data import CSUITE_IDS, DATASET_IDS, DGP_IDS, PotentialOutcomeTable, generate_csuite, generate_dgp, get_spec

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_ESTIMATORS",
    "ExperimentConfig",
    "MetricRow",
    "MetricTriplet",
    "Pool",
    "build_pool",
    "metric_triplet",
    "normality_diagnostic",
    "rows_to_csv",
    "rows_to_json",
    "run_experiment",
    "run_grid",
    "simulate",
]

log = logging.getLogger(__name__)

DEFAULT_ESTIMATORS = ("naive", "pairs", "rct_based", "selfnorm_based")
CSV_COLUMNS = (
    "dataset",
    "n",
    "scheme",
    "scheme_param",
    "sigma2_nu",
    "estimator",
    "variance",
    "bias",
    "mse",
    "n_valid_reps",
    "base_seed",
)
RCT_MAX_RETRIES = 100

# seed-stream tags
_POOL, _MODEL, _BASE_P, _REP, _BETA, _NU = range(6)


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of a simulation study.

    ``sigma2_beta`` is used by the logistic scheme, ``subsample_m`` by the
    subsampling scheme.  ``model`` is ``"hypothetical"`` (ground truth plus
    multiplicative noise of variance ``sigma2_nu``) or ``"t_learner"`` (linear
    outcome regression fitted on an observational sample of the DGP datasets).
    """

    dataset: str
    n: int = 2000
    scheme: str = "logistic"
    sigma2_beta: float = 1.0
    subsample_m: Optional[int] = None
    sigma2_nu: float = 0.1
    replications: int = 100
    base_seed: int = 0
    estimators: tuple[str, ...] = DEFAULT_ESTIMATORS
    model: str = "hypothetical"
    clip: float = DEFAULT_CLIP
    freeze_beta: bool = False
    redraw_nu: bool = False
    bessel: bool = False
    noise_distribution: str = "gaussian"
    per_arm_noise: bool = False
    dataset_params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "dataset_params", dict(self.dataset_params))
        if self.dataset not in DATASET_IDS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; valid ids: {', '.join(DATASET_IDS)}")
        if self.n < 2:
            raise ConfigError("pool size n must be at least 2")
        if self.replications < 2:
            raise ConfigError("replications must be at least 2")
        if self.scheme not in ("rct", "logistic", "subsample"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "logistic" and not self.sigma2_beta >= 0:
            raise ConfigError("sigma2_beta must be non-negative")
        if self.scheme == "subsample" and (self.subsample_m is None or self.subsample_m < 2):
            raise ConfigError("subsample scheme needs subsample_m >= 2")
        if not self.sigma2_nu >= 0:
            raise ConfigError("sigma2_nu must be non-negative")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        unknown = [e for e in self.estimators if e not in est.CAUSAL_ERROR_METHODS]
        if unknown:
            raise ConfigError(f"unknown estimators {unknown}; valid: {', '.join(est.CAUSAL_ERROR_METHODS)}")
        if self.model not in ("hypothetical", "t_learner"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.model == "t_learner" and self.dataset not in DGP_IDS:
            raise ConfigError("the t_learner model needs an observational DGP dataset")

    @property
    def scheme_param(self) -> float:
        if self.scheme == "logistic":
            return float(self.sigma2_beta)
        if self.scheme == "subsample":
            return float(self.subsample_m)
        return math.nan

    @property
    def units_per_plan(self) -> int:
        return self.subsample_m if self.scheme == "subsample" else self.n

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimators"] = list(self.estimators)
        return d


@dataclass(frozen=True)
class MetricTriplet:
    variance: float
    bias: float
    mse: float
    method: str
    n_valid_reps: int
    target: float = math.nan
    unreliable: bool = False


@dataclass(frozen=True)
class MetricRow:
    dataset: str
    n: int
    scheme: str
    scheme_param: float
    sigma2_nu: float
    estimator: str
    variance: float
    bias: float
    mse: float
    n_valid_reps: int
    base_seed: int


class Normality(NamedTuple):
    skewness: float
    excess_kurtosis: float
    degenerate: bool


def _rng(base_seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(base_seed) & 0xFFFFFFFFFFFFFFFF, *keys]))


# ---------------------------------------------------------------------------
# pool
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Pool:
    """Ground truth, model predictions and (subsampling only) base probabilities."""

    table: PotentialOutcomeTable
    model: ModelOutcomeTable
    base_p: Optional[np.ndarray] = None

    @property
    def target(self) -> float:
        """Pool-level causal error ``mean(ym1 - ym0) - mean(y1 - y0)``."""
        return float(np.mean(self.model.ym1 - self.model.ym0) - np.mean(self.table.y1 - self.table.y0))


def _noise(config: ExperimentConfig) -> NoiseModel:
    return NoiseModel(config.sigma2_nu, distribution=config.noise_distribution, per_arm_noise=config.per_arm_noise)


def build_pool(config: ExperimentConfig) -> Pool:
    spec = get_spec(config.dataset, **config.dataset_params)
    pool_rng = _rng(config.base_seed, _POOL)
    if spec.id in CSUITE_IDS:
        table = generate_csuite(spec, config.n, pool_rng)
        sample = None
    else:
        sample, table = generate_dgp(spec, config.n, pool_rng)
    if config.model == "t_learner":
        model = predict_outcomes(fit_t_learner(sample), table)
    else:
        model = apply_hypothetical_model(table, _noise(config), _rng(config.base_seed, _MODEL))
    base_p = None
    if config.scheme == "subsample":
        base_p = draw_base_probabilities(config.n, _rng(config.base_seed, _BASE_P))
    return Pool(table, model, base_p)


# ---------------------------------------------------------------------------
# replications
# ---------------------------------------------------------------------------


def _rct_indicator(rng: np.random.Generator, m: int) -> Optional[np.ndarray]:
    for _ in range(RCT_MAX_RETRIES):
        b = rng.random(m) < 0.5
        if 0 < b.sum() < m:
            return b
    return None


def _replicate(config: ExperimentConfig, pool: Pool, frozen_beta: Optional[np.ndarray], r: int) -> dict[str, float]:
    rng = _rng(config.base_seed, _REP, r)
    table, model = pool.table, pool.model
    if config.redraw_nu and config.model == "hypothetical":
        model = apply_hypothetical_model(table, _noise(config), _rng(config.base_seed, _NU, r))

    if config.scheme == "subsample":
        idx = rng.integers(0, config.n, config.subsample_m)
        p = np.clip(pool.base_p[idx], config.clip, 1.0 - config.clip)
        y1, y0, ym1, ym0 = table.y1[idx], table.y0[idx], model.ym1[idx], model.ym0[idx]
    else:
        y1, y0, ym1, ym0 = table.y1, table.y0, model.ym1, model.ym0
        if config.scheme == "logistic":
            beta = frozen_beta
            if beta is None:
                beta = rng.normal(0.0, math.sqrt(config.sigma2_beta), table.covariates.shape[1])
            p = logistic_probabilities(table.covariates, beta, config.clip)
        else:
            p = np.full(config.n, 0.5)
    b = rng.random(p.shape[0]) < p

    model_mean = float(np.mean(ym1 - ym0))
    out: dict[str, float] = {"_target": model_mean - float(np.mean(y1 - y0))}
    truth_ipw = None
    for method in config.estimators:
        if method in ("naive", "pairs") and truth_ipw is None:
            truth_ipw = float(est.ipw_contrast(y1, y0, p, b))
        if method == "naive":
            out[method] = model_mean - truth_ipw
        elif method == "pairs":
            out[method] = float(est.ipw_contrast(ym1, ym0, p, b)) - truth_ipw
        elif method == "selfnorm_based":
            out[method] = model_mean - float(est.hajek_contrast(y1, y0, p, b))
        elif method == "pairs_selfnorm":
            out[method] = float(est.hajek_contrast(ym1, ym0, p, b) - est.hajek_contrast(y1, y0, p, b))
        elif method == "rct_based":
            b_rct = _rct_indicator(rng, p.shape[0])
            out[method] = math.nan if b_rct is None else model_mean - float(est.rct_contrast(y1, y0, b_rct))
    return out


def _replicate_chunk(args) -> list[dict[str, float]]:
    config, pool, frozen_beta, reps = args
    return [_replicate(config, pool, frozen_beta, r) for r in reps]


def simulate(config: ExperimentConfig, jobs: int = 1, pool: Optional[Pool] = None) -> tuple[dict[str, np.ndarray], float]:
    """Per-replication estimator values and the causal-error target.

    Returns ``({method: values}, target)`` with values ordered by replication
    number (NaN marks a dropped replication).
    """
    pool = pool or build_pool(config)
    frozen_beta = None
    if config.scheme == "logistic" and config.freeze_beta:
        frozen_beta = _rng(config.base_seed, _BETA).normal(
            0.0, math.sqrt(config.sigma2_beta), pool.table.covariates.shape[1]
        )
    reps = list(range(1, config.replications + 1))
    if jobs > 1:
        chunks = [reps[i::jobs] for i in range(jobs)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_replicate_chunk, [(config, pool, frozen_beta, c) for c in chunks]))
        by_rep = {}
        for chunk, part in zip(chunks, parts):
            by_rep.update(zip(chunk, part))
        results = [by_rep[r] for r in reps]
    else:
        results = _replicate_chunk((config, pool, frozen_beta, reps))

    values = {m: np.array([res[m] for res in results]) for m in config.estimators}
    if config.redraw_nu:
        target = math.fsum(res["_target"] for res in results) / len(results)
    else:
        target = pool.target
    return values, target


def metric_triplet(values: Sequence[float], target: float, method: str = "", bessel: bool = False) -> MetricTriplet:
    """Plug-in variance, bias and MSE of ``values`` around ``target``.

    Non-finite entries are dropped and reflected in ``n_valid_reps``.
    """
    x = np.asarray(values, dtype=float)
    total = x.shape[0]
    x = x[np.isfinite(x)]
    k = x.shape[0]
    if k == 0:
        raise ExperimentError(f"all {total} replications degenerate for {method or 'estimator'}")
    mean = math.fsum(x) / k
    variance = math.fsum((x - mean) ** 2) / (k - 1 if bessel and k > 1 else k)
    bias = mean - target
    mse = math.fsum((x - target) ** 2) / k
    return MetricTriplet(variance, bias, mse, method, k, target, unreliable=k < total / 2)


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[MetricTriplet]:
    """Metrics for every estimator in ``config`` (one :class:`MetricTriplet` each)."""
    values, target = simulate(config, jobs=jobs)
    out = []
    for method in config.estimators:
        triplet = metric_triplet(values[method], target, method, config.bessel)
        if triplet.unreliable:
            log.warning("%s/%s: only %d of %d replications usable", config.dataset, method, triplet.n_valid_reps, config.replications)
        out.append(triplet)
    return out


def _rows_for(config: ExperimentConfig, jobs: int) -> list[MetricRow]:
    sigma2_nu = math.nan if config.model == "t_learner" else float(config.sigma2_nu)
    common = dict(
        dataset=config.dataset,
        n=config.n,
        scheme=config.scheme,
        scheme_param=config.scheme_param,
        sigma2_nu=sigma2_nu,
        base_seed=config.base_seed,
    )
    try:
        triplets = {t.method: t for t in run_experiment(config, jobs=jobs)}
    except Exception as exc:  # a failing cell becomes flagged rows
        log.error("cell %s failed: %s", config, exc)
        triplets = {}
    rows = []
    for method in config.estimators:
        t = triplets.get(method)
        if t is None:
            rows.append(MetricRow(estimator=method, variance=math.nan, bias=math.nan, mse=math.nan, n_valid_reps=0, **common))
        else:
            rows.append(MetricRow(estimator=method, variance=t.variance, bias=t.bias, mse=t.mse, n_valid_reps=t.n_valid_reps, **common))
    return rows


def run_grid(configs: Iterable[ExperimentConfig], jobs: int = 1) -> list[MetricRow]:
    """Run every config; one row per (config, estimator).  Failed cells give NaN rows."""
    configs = list(configs)
    if jobs > 1 and len(configs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_rows_for, configs, [1] * len(configs)))
    else:
        parts = [_rows_for(c, jobs) for c in configs]
    return [row for part in parts for row in part]


def normality_diagnostic(errors: Sequence[float], n: int = 1) -> Normality:
    """Sample skewness and excess kurtosis of ``sqrt(n)``-scaled errors.

    Scaling does not change either statistic; it is applied for fidelity with the
    asymptotic statement being checked.  Constant input gives ``(0, 0, True)``.
    """
    x = np.sqrt(n) * np.asarray(errors, dtype=float)
    x = x[np.isfinite(x)]
    if x.shape[0] < 3 or np.ptp(x) == 0.0:
        return Normality(0.0, 0.0, True)
    return Normality(float(stats.skew(x)), float(stats.kurtosis(x)), False)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def rows_to_csv(rows: Iterable[MetricRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_json(rows: Iterable[MetricRow]) -> str:
    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    records = [{c: clean(getattr(row, c)) for c in CSV_COLUMNS} for row in rows]
    return json.dumps(records, indent=2)


def rows_from_csv(text: str) -> list[MetricRow]:
    types = {f.name: f.type for f in fields(MetricRow)}
    out = []
    for rec in csv.DictReader(io.StringIO(text)):
        kw = {}
        for name in CSV_COLUMNS:
            raw = rec[name]
            kind = types[name]
            kw[name] = int(raw) if kind == "int" else float(raw) if kind == "float" else raw
        out.append(MetricRow(**kw))
    return out
