"""Model-predicted potential outcomes.

Two sources: a hypothetical model that perturbs the ground truth with
multiplicatively modulated noise, ``ym_t = y_t + V(y_t) * nu``, and a linear
outcome regression fitted on observational data.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .scm_data import ObservationalSample, PotentialOutcomeTable

__all__ = [
    "LinearOutcomeModel",
    "ModelOutcomeTable",
    "NoiseModel",
    "apply_hypothetical_model",
    "fit_t_learner",
    "predict_outcomes",
]

RIDGE_LAMBDA = 1e-6


@dataclass(frozen=True)
class NoiseModel:
    """Distribution of the model error ``nu`` and its modulation function ``V``.

    ``v_coeffs`` of ``None`` means ``V(y) = y``; otherwise ``V(y) = sum_k c_k y**k``
    with coefficients in increasing degree.
    """

    sigma2_nu: float
    v_coeffs: Optional[tuple[float, ...]] = None
    distribution: str = "gaussian"
    per_arm_noise: bool = False

    def __post_init__(self):
        if not self.sigma2_nu >= 0:
            raise ValueError("sigma2_nu must be non-negative")
        if self.distribution not in ("gaussian", "uniform"):
            raise ValueError(f"unknown noise distribution {self.distribution!r}")
        if self.v_coeffs is not None:
            coeffs = tuple(float(c) for c in self.v_coeffs)
            if not coeffs or not np.all(np.isfinite(coeffs)):
                raise ValueError("polynomial coefficients must be finite and non-empty")
            object.__setattr__(self, "v_coeffs", coeffs)

    def v(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.v_coeffs is None:
            return y
        return np.polynomial.polynomial.polyval(y, self.v_coeffs)

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        sd = np.sqrt(self.sigma2_nu)
        if self.distribution == "gaussian":
            return rng.normal(0.0, sd, size)
        # uniform(-a, a) has variance a^2 / 3
        half_width = np.sqrt(3.0) * sd
        return rng.uniform(-half_width, half_width, size)


@dataclass(frozen=True)
class ModelOutcomeTable:
    """Model predictions aligned 1:1 with a :class:`PotentialOutcomeTable`.

    ``nu`` holds the realized model error (treated arm when noise is drawn per
    arm); ``nu_control`` is set only for per-arm noise.  Both are ``None`` for
    fitted models.
    """

    ym1: np.ndarray
    ym0: np.ndarray
    nu: Optional[np.ndarray] = None
    nu_control: Optional[np.ndarray] = None
    noise: Optional[NoiseModel] = None

    def __post_init__(self):
        ym1 = np.asarray(self.ym1, dtype=float)
        ym0 = np.asarray(self.ym0, dtype=float)
        if ym1.shape != ym0.shape or ym1.ndim != 1:
            raise ValueError("ym1 and ym0 must be aligned vectors")
        if not (np.all(np.isfinite(ym1)) and np.all(np.isfinite(ym0))):
            raise ValueError("model outcomes must be finite")
        object.__setattr__(self, "ym1", ym1)
        object.__setattr__(self, "ym0", ym0)

    @property
    def n(self) -> int:
        return self.ym1.shape[0]

    @property
    def nu_treated(self) -> Optional[np.ndarray]:
        return self.nu

    @property
    def nu_untreated(self) -> Optional[np.ndarray]:
        return self.nu if self.nu_control is None else self.nu_control

    def take(self, index: np.ndarray) -> ModelOutcomeTable:
        pick = (lambda a: None if a is None else a[index])
        return ModelOutcomeTable(self.ym1[index], self.ym0[index], pick(self.nu), pick(self.nu_control), self.noise)

    @classmethod
    def from_truth(cls, table: PotentialOutcomeTable) -> ModelOutcomeTable:
        """A perfect model."""
        return cls(table.y1.copy(), table.y0.copy(), np.zeros(table.n), None, NoiseModel(0.0))


def _check_magnitude(table: PotentialOutcomeTable, noise: NoiseModel) -> None:
    for y in (table.y1, table.y0):
        if noise.sigma2_nu * np.mean(noise.v(y) ** 2) >= np.mean(y**2):
            warnings.warn(
                "model noise is at least as large as the ground-truth outcomes; "
                "the variance-reduction guarantee does not apply",
                RuntimeWarning,
                stacklevel=3,
            )
            return


def apply_hypothetical_model(
    table: PotentialOutcomeTable, noise: NoiseModel, seed: int | np.random.Generator | None
) -> ModelOutcomeTable:
    """Perturb the ground truth: ``ym_t = y_t + V(y_t) * nu``, one ``nu`` per unit shared by both arms."""
    _check_magnitude(table, noise)
    rng = np.random.default_rng(seed)
    nu = noise.draw(rng, table.n)
    nu0 = noise.draw(rng, table.n) if noise.per_arm_noise else None
    ym1 = table.y1 + noise.v(table.y1) * nu
    ym0 = table.y0 + noise.v(table.y0) * (nu if nu0 is None else nu0)
    return ModelOutcomeTable(ym1, ym0, nu, nu0, noise)


@dataclass(frozen=True)
class LinearOutcomeModel:
    """Linear regression of Y on ``[1, T, X, W]``.

    ``coef`` is ordered intercept, treatment, then features.  ``ridge`` records
    whether the ridge fallback was needed.
    """

    coef: np.ndarray
    n_features: int
    ridge: bool = False

    @property
    def treatment_coef(self) -> float:
        return float(self.coef[1])

    def predict(self, features: np.ndarray, t) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=float))
        if features.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {features.shape[1]}")
        t = np.broadcast_to(np.asarray(t, dtype=float), (features.shape[0],))
        return self.coef[0] + self.coef[1] * t + features @ self.coef[2:]


def _design(features: np.ndarray, t: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(features.shape[0]), t, features])


def fit_t_learner(sample: ObservationalSample) -> LinearOutcomeModel:
    """Ordinary least squares of Y on ``[1, T, X, W]``.

    Falls back to ridge with lambda 1e-6 (and warns) when the design is rank
    deficient, e.g. a binary treatment with an empty arm.
    """
    features = sample.features
    t = np.asarray(sample.t, dtype=float)
    design = _design(features, t)
    coef, _, rank, _ = np.linalg.lstsq(design, sample.y, rcond=None)
    if rank == design.shape[1]:
        return LinearOutcomeModel(coef, features.shape[1])
    warnings.warn("rank-deficient design matrix; using ridge fallback", RuntimeWarning, stacklevel=2)
    gram = design.T @ design + RIDGE_LAMBDA * np.eye(design.shape[1])
    coef = np.linalg.solve(gram, design.T @ sample.y)
    return LinearOutcomeModel(coef, features.shape[1], ridge=True)


def predict_outcomes(predictor: LinearOutcomeModel, table: PotentialOutcomeTable) -> ModelOutcomeTable:
    """Model potential outcomes at T=1 and T=0 for every unit of ``table``."""
    return ModelOutcomeTable(predictor.predict(table.covariates, 1.0), predictor.predict(table.covariates, 0.0))
