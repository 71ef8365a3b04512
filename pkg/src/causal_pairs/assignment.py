"""Treatment assignment plans (per-unit propensities) and their Bernoulli realizations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import expit

from .errors import ConfigError

__all__ = [
    "DEFAULT_CLIP",
    "AssignmentPlan",
    "AssignmentRealization",
    "draw_base_probabilities",
    "plan_logistic",
    "plan_rct",
    "plan_subsample",
    "sample_realization",
]

DEFAULT_CLIP = 1e-3
SCHEMES = ("rct", "logistic", "subsample")


@dataclass(frozen=True)
class AssignmentPlan:
    """Known treatment probabilities ``p`` for each unit of a pool.

    ``unit_index`` maps plan rows to rows of the source table when the plan was
    built from a subsample.
    """

    p: np.ndarray
    scheme: str
    unit_index: Optional[np.ndarray] = None
    clip: float = DEFAULT_CLIP

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.shape[0] < 1:
            raise ValueError("p must be a non-empty vector")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not 0.0 <= self.clip < 0.5:
            raise ConfigError("clip must lie in [0, 0.5)")
        if not np.all((p >= self.clip) & (p <= 1.0 - self.clip)) or np.any((p <= 0.0) | (p >= 1.0)):
            raise ValueError("plan probabilities must lie strictly inside (0, 1) and within the clip bounds")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        if self.unit_index is not None:
            idx = np.asarray(self.unit_index, dtype=np.int64)
            if idx.shape != p.shape:
                raise ValueError("unit_index must align with p")
            idx.setflags(write=False)
            object.__setattr__(self, "unit_index", idx)

    @property
    def n(self) -> int:
        return self.p.shape[0]

    @property
    def weights(self) -> np.ndarray:
        """Treated-arm weights 1/p."""
        return 1.0 / self.p

    def to_csv(self) -> str:
        rows = ["unit,p"] + [f"{i},{v:.17g}" for i, v in enumerate(self.p)]
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class AssignmentRealization:
    """One Bernoulli draw ``b`` from a plan; ``b[i] == 1`` puts unit i in the treated set."""

    b: np.ndarray
    plan: AssignmentPlan

    def __post_init__(self):
        b = np.asarray(self.b)
        if b.shape != self.plan.p.shape:
            raise ValueError("realization must align with its plan")
        if not np.all((b == 0) | (b == 1)):
            raise ValueError("b must be 0/1")
        b = b.astype(np.int8)
        b.setflags(write=False)
        object.__setattr__(self, "b", b)

    @property
    def treated(self) -> np.ndarray:
        return self.b.astype(bool)

    @property
    def degenerate_group(self) -> bool:
        """True when the treated or the control group is empty."""
        k = int(self.b.sum())
        return k == 0 or k == self.b.shape[0]

    def to_csv(self) -> str:
        rows = ["unit,p,b"] + [f"{i},{p:.17g},{b}" for i, (p, b) in enumerate(zip(self.plan.p, self.b))]
        return "\n".join(rows) + "\n"


def plan_rct(n: int, clip: float = DEFAULT_CLIP) -> AssignmentPlan:
    if n < 2:
        raise ConfigError("an RCT plan needs n >= 2 so that both groups can occur")
    return AssignmentPlan(np.full(n, 0.5), "rct", clip=clip)


def logistic_probabilities(covariates: np.ndarray, beta: np.ndarray, clip: float = DEFAULT_CLIP) -> np.ndarray:
    """sigmoid(x_i . beta) clipped to [clip, 1 - clip]; ``beta`` may be (d,) or (R, d)."""
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    logits = np.asarray(beta, dtype=float) @ x.T
    return np.clip(expit(logits), clip, 1.0 - clip)


def plan_logistic(
    covariates: np.ndarray,
    sigma2_beta: float,
    seed: int | np.random.Generator | None,
    clip: float = DEFAULT_CLIP,
    beta: Optional[np.ndarray] = None,
) -> AssignmentPlan:
    """Logistic propensity plan with coefficients drawn from N(0, sigma2_beta I).

    Pass ``beta`` to fix the coefficients instead of drawing them.
    """
    x = np.asarray(covariates, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not np.all(np.isfinite(x)):
        raise ValueError("covariates must be finite")
    if sigma2_beta < 0:
        raise ConfigError("sigma2_beta must be non-negative")
    if beta is None:
        rng = np.random.default_rng(seed)
        beta = rng.normal(0.0, np.sqrt(sigma2_beta), x.shape[1])
    return AssignmentPlan(logistic_probabilities(x, beta, clip), "logistic", clip=clip)


def draw_base_probabilities(n: int, seed, low: float = 0.1, high: float = 0.9) -> np.ndarray:
    """Fixed per-unit probabilities for the random-subsampling scheme."""
    return np.random.default_rng(seed).uniform(low, high, n)


def plan_subsample(
    base_p: np.ndarray,
    m: int,
    seed: int | np.random.Generator | None,
    clip: float = DEFAULT_CLIP,
    index: Optional[np.ndarray] = None,
) -> AssignmentPlan:
    """Plan over ``m`` units drawn with replacement from a pool with fixed probabilities.

    ``index`` overrides the random draw (e.g. the identity subsample).
    """
    base_p = np.asarray(base_p, dtype=float)
    if m < 2:
        raise ConfigError("subsample size m must be at least 2")
    if np.any((base_p <= 0.0) | (base_p >= 1.0)):
        raise ValueError("base probabilities must lie strictly inside (0, 1)")
    if index is None:
        index = np.random.default_rng(seed).integers(0, base_p.shape[0], m)
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (m,):
        raise ValueError("index must have length m")
    return AssignmentPlan(np.clip(base_p[index], clip, 1.0 - clip), "subsample", unit_index=index, clip=clip)


def sample_realization(plan: AssignmentPlan, seed: int | np.random.Generator | None) -> AssignmentRealization:
    """Independent Bernoulli(p_i) draws."""
    u = np.random.default_rng(seed).random(plan.n)
    return AssignmentRealization((u < plan.p).astype(np.int8), plan)
