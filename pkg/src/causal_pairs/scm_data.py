"""Synthetic structural causal models with ground-truth potential outcomes.

Three csuite-style SCMs (nonlinear Simpson, linear-Gaussian chain, linear-Gaussian
fork) and a linear-in-treatment observational DGP with continuous or binary
treatment.  Every generator draws the exogenous noise once per unit and evaluates
the structural equations twice, with the treatment node forced to 1 and to 0, so
both potential outcomes share the same noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError

__all__ = [
    "CSUITE_IDS",
    "DATASET_IDS",
    "DGP_IDS",
    "ObservationalSample",
    "PotentialOutcomeTable",
    "ScmSpec",
    "csuite_nodes",
    "csuite_potential_outcomes",
    "dgp_population_ate",
    "generate",
    "generate_csuite",
    "generate_dgp",
    "get_spec",
    "sample_csuite_exogenous",
    "theta",
]

CSUITE_IDS = ("csuite_1", "csuite_2", "csuite_3")
DGP_IDS = ("dgp_continuous", "dgp_binary")
DATASET_IDS = CSUITE_IDS + DGP_IDS

_SQRT_3_20 = np.sqrt(3.0 / 20.0)
_SQRT_1_3 = np.sqrt(1.0 / 3.0)
_SQRT_2_3 = np.sqrt(2.0 / 3.0)
# sqrt(2/2)
_CHAIN_COEF = 1.0

_DGP_DEFAULTS = {"n_x": 30, "n_w": 30, "coef_seed": 0, "n_support": 5}


@dataclass(frozen=True)
class ScmSpec:
    """Identifies a generator and which of its nodes play which role."""

    id: str
    treatment_node: int
    outcome_node: int
    covariate_nodes: tuple[int, ...]
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.id not in DATASET_IDS:
            raise ConfigError(f"unknown dataset id {self.id!r}; valid ids: {', '.join(DATASET_IDS)}")
        if self.treatment_node == self.outcome_node:
            raise ConfigError("treatment and outcome nodes must differ")
        if {self.treatment_node, self.outcome_node} & set(self.covariate_nodes):
            raise ConfigError("covariate nodes must exclude treatment and outcome")


def get_spec(dataset: str, **params) -> ScmSpec:
    """Build the :class:`ScmSpec` for a dataset id.

    For the DGP ids, ``params`` may override ``n_x``, ``n_w``, ``coef_seed`` and
    ``n_support`` (number of nonzero coordinates in the confounder coefficients).
    """
    if dataset == "csuite_1":
        return ScmSpec(dataset, treatment_node=1, outcome_node=3, covariate_nodes=(0,))
    if dataset in ("csuite_2", "csuite_3"):
        return ScmSpec(dataset, treatment_node=1, outcome_node=2, covariate_nodes=(0,))
    if dataset in DGP_IDS:
        unknown = set(params) - set(_DGP_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown DGP parameters: {sorted(unknown)}")
        merged = {**_DGP_DEFAULTS, **params}
        if merged["n_x"] < 2 or merged["n_w"] <= 0:
            raise ConfigError("DGP needs n_x >= 2 (theta uses X_0 and X_1) and n_w >= 1")
        # node layout: T=0, Y=1; X and W are carried outside the node indexing
        return ScmSpec(dataset, treatment_node=0, outcome_node=1, covariate_nodes=(), params=merged)
    raise ConfigError(f"unknown dataset id {dataset!r}; valid ids: {', '.join(DATASET_IDS)}")


@dataclass(frozen=True)
class PotentialOutcomeTable:
    """Per-unit covariates together with both potential outcomes."""

    covariates: np.ndarray
    y1: np.ndarray
    y0: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariates, dtype=float)
        if cov.ndim == 1:
            cov = cov[:, None]
        y1 = np.asarray(self.y1, dtype=float)
        y0 = np.asarray(self.y0, dtype=float)
        if y1.shape != y0.shape or y1.ndim != 1 or cov.shape[0] != y1.shape[0]:
            raise ValueError("covariates, y1 and y0 must share their leading dimension")
        if y1.shape[0] < 2:
            raise ValueError("a table needs at least 2 units")
        if not (np.all(np.isfinite(cov)) and np.all(np.isfinite(y1)) and np.all(np.isfinite(y0))):
            raise ValueError("table entries must be finite")
        object.__setattr__(self, "covariates", cov)
        object.__setattr__(self, "y1", y1)
        object.__setattr__(self, "y0", y0)

    @property
    def n(self) -> int:
        return self.y1.shape[0]

    def take(self, index: np.ndarray) -> PotentialOutcomeTable:
        """Rows at ``index`` (repeats allowed)."""
        return PotentialOutcomeTable(self.covariates[index], self.y1[index], self.y0[index])


@dataclass(frozen=True)
class ObservationalSample:
    """Factual data from the observational DGP."""

    covariates: np.ndarray
    w_confounders: np.ndarray
    t: np.ndarray
    y: np.ndarray

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def features(self) -> np.ndarray:
        """X followed by W, the layout used for assignment and for model fitting."""
        return np.hstack([self.covariates, self.w_confounders])


# ---------------------------------------------------------------------------
# csuite
# ---------------------------------------------------------------------------


def sample_csuite_exogenous(dataset: str, n: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    """Draw the exogenous noise for ``n`` units of a csuite SCM."""
    x0 = rng.standard_normal(n)
    z1 = rng.standard_normal(n)
    if dataset == "csuite_1":
        z2 = rng.standard_normal(n)
        z3 = rng.laplace(0.0, 1.0, n)
        return {"x0": x0, "z1": z1, "z2": z2, "z3": z3}
    z2 = rng.standard_normal(n)
    return {"x0": x0, "z1": z1, "z2": z2}


def _softplus(x):
    return np.logaddexp(0.0, x)


def csuite_nodes(dataset: str, exog: Mapping[str, np.ndarray], treatment=None) -> np.ndarray:
    """Evaluate every node of a csuite SCM.

    ``treatment`` forces node X1 to the given value (scalar or per-unit array);
    ``None`` leaves it observational.  Returns an ``(n, n_nodes)`` array.
    """
    x0 = np.asarray(exog["x0"], dtype=float)
    if dataset == "csuite_1":
        x1 = _softplus(1.0 - x0) + _SQRT_3_20 * exog["z1"]
        if treatment is not None:
            x1 = np.broadcast_to(np.asarray(treatment, dtype=float), x0.shape)
        x2 = np.tanh(2.0 * x1) + 1.5 * x0 - 1.0 + np.tanh(exog["z2"])
        x3 = 5.0 * np.tanh((x2 - 4.0) / 5.0) + 3.0 + exog["z3"] / np.sqrt(10.0)
        return np.column_stack([x0, x1, x2, x3])
    if dataset in ("csuite_2", "csuite_3"):
        x1 = _CHAIN_COEF * x0 + _SQRT_1_3 * exog["z1"]
        if treatment is not None:
            x1 = np.broadcast_to(np.asarray(treatment, dtype=float), x0.shape)
        parent = x1 if dataset == "csuite_2" else x0
        x2 = _SQRT_2_3 * parent + _SQRT_1_3 * exog["z2"]
        return np.column_stack([x0, x1, x2])
    raise ConfigError(f"not a csuite dataset: {dataset!r}")


def csuite_potential_outcomes(spec: ScmSpec, exog: Mapping[str, np.ndarray]) -> PotentialOutcomeTable:
    """Potential-outcome table for given exogenous noise (no randomness here)."""
    treated = csuite_nodes(spec.id, exog, treatment=1.0)
    control = csuite_nodes(spec.id, exog, treatment=0.0)
    cov = treated[:, list(spec.covariate_nodes)]
    return PotentialOutcomeTable(cov, treated[:, spec.outcome_node], control[:, spec.outcome_node])


def generate_csuite(spec: ScmSpec, n: int, seed: int) -> PotentialOutcomeTable:
    """Sample ``n`` units of a csuite SCM with both potential outcomes."""
    if spec.id not in CSUITE_IDS:
        raise ConfigError(f"{spec.id!r} is not a csuite dataset")
    if n < 2:
        raise ConfigError("n must be at least 2")
    rng = np.random.default_rng(seed)
    return csuite_potential_outcomes(spec, sample_csuite_exogenous(spec.id, n, rng))


# ---------------------------------------------------------------------------
# observational DGP
# ---------------------------------------------------------------------------


def theta(x: np.ndarray) -> np.ndarray:
    """Heterogeneous effect exp(2 x_0) (x_1 + 0.5)."""
    x = np.atleast_2d(x)
    return np.exp(2.0 * x[:, 0]) * (x[:, 1] + 0.5)


def dgp_population_ate() -> float:
    """E[theta(X)] for X ~ U(0,1)^n_x, i.e. (e^2 - 1)/2 * 1."""
    return (np.exp(2.0) - 1.0) / 2.0


def _dgp_coefficients(params: Mapping[str, Any]) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(params["coef_seed"])
    n_w, k = params["n_w"], min(params["n_support"], params["n_w"])
    beta = np.zeros(n_w)
    gamma = np.zeros(n_w)
    beta[:k] = rng.uniform(-1.0, 1.0, k)
    gamma[:k] = rng.uniform(-1.0, 1.0, k)
    return beta, gamma


def generate_dgp(spec: ScmSpec, n: int, seed: int) -> tuple[ObservationalSample, PotentialOutcomeTable]:
    """Sample the observational DGP and the matching potential outcomes.

    The returned table's covariates are X concatenated with W.
    """
    if spec.id not in DGP_IDS:
        raise ConfigError(f"{spec.id!r} is not a DGP dataset")
    if n < 2:
        raise ConfigError("n must be at least 2")
    n_x, n_w = spec.params["n_x"], spec.params["n_w"]
    beta, gamma = _dgp_coefficients(spec.params)
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((n, n_w))
    x = rng.uniform(0.0, 1.0, (n, n_x))
    eta = rng.uniform(-1.0, 1.0, n)
    eps = rng.uniform(-1.0, 1.0, n)

    index = w @ beta + eta
    if spec.id == "dgp_continuous":
        t = index
    else:
        t = (rng.random(n) < 1.0 / (1.0 + np.exp(-index))).astype(float)
    effect = theta(x)
    base = w @ gamma + eps
    y = t * effect + base

    sample = ObservationalSample(covariates=x, w_confounders=w, t=t, y=y)
    table = PotentialOutcomeTable(np.hstack([x, w]), effect + base, base)
    return sample, table


def generate(dataset: str, n: int, seed: int, **params) -> PotentialOutcomeTable:
    """Potential-outcome table for any dataset id."""
    spec = get_spec(dataset, **params)
    if spec.id in CSUITE_IDS:
        return generate_csuite(spec, n, seed)
    return generate_dgp(spec, n, seed)[1]
