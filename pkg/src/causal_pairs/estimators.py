"""Treatment-effect and causal-error estimators.

Two layers.  The array kernels (``ipw_contrast`` etc.) take outcome vectors, the
propensities ``p`` and the treated indicator ``b``; ``p`` and ``b`` may carry a
leading replication axis so whole batches of realizations evaluate at once.
The object API wraps them for single tables and realizations and returns
:class:`EffectEstimate` / :class:`CausalErrorEstimate`.

The additive decomposition used throughout::

    ipw(y)  = mean(y1 - y0) + f(B)
    ipw(ym) = mean(ym1 - ym0) + f(B) + g(nu, B)

where ``ym = y + V(y) * nu``.  The pairs estimator ``ipw(ym) - ipw(y)`` therefore
drops ``f`` entirely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import AssignmentPlan, AssignmentRealization
from .model_sim import ModelOutcomeTable, NoiseModel
from .scm_data import PotentialOutcomeTable

__all__ = [
    "CAUSAL_ERROR_METHODS",
    "CausalErrorEstimate",
    "EffectEstimate",
    "decomposition_f",
    "decomposition_g",
    "f_term",
    "hajek_contrast",
    "ipw_contrast",
    "ipw_effect",
    "ipw_effect_selfnorm",
    "naive_causal_error",
    "pairs_causal_error",
    "pairs_selfnorm_causal_error",
    "population_true_effect",
    "rct_causal_error",
    "rct_contrast",
    "rct_effect",
    "sample_mean_effect",
    "selfnorm_causal_error",
    "var_f_closed_form",
    "var_g_closed_form",
    "var_g_four_term_form",
]

EFFECT_IDS = ("sample_mean_model", "population_true", "rct", "ipw", "ipw_selfnorm")
CAUSAL_ERROR_METHODS = ("naive", "pairs", "rct_based", "selfnorm_based", "pairs_selfnorm")


@dataclass(frozen=True)
class EffectEstimate:
    value: float
    estimator_id: str
    degenerate_group: bool = False


@dataclass(frozen=True)
class CausalErrorEstimate:
    value: float
    method: str
    degenerate_group: bool = False


# ---------------------------------------------------------------------------
# array kernels
# ---------------------------------------------------------------------------


def ipw_contrast(y1, y0, p, b) -> np.ndarray:
    """Horvitz-Thompson contrast ``(1/N) sum_B y1/p - (1/N) sum_{not B} y0/(1-p)``.

    ``1/(1-p)`` equals ``w/(w-1)`` with ``w = 1/p``.  Empty groups contribute 0.
    """
    b = np.asarray(b, dtype=bool)
    n = b.shape[-1]
    treated = np.where(b, y1 / p, 0.0).sum(axis=-1)
    control = np.where(b, 0.0, y0 / (1.0 - p)).sum(axis=-1)
    return (treated - control) / n


def hajek_contrast(y1, y0, p, b) -> np.ndarray:
    """Self-normalized (Hajek) contrast; NaN where a group is empty."""
    b = np.asarray(b, dtype=bool)
    w1 = np.where(b, 1.0 / p, 0.0)
    w0 = np.where(b, 0.0, 1.0 / (1.0 - p))
    s1 = w1.sum(axis=-1)
    s0 = w0.sum(axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (w1 * y1).sum(axis=-1) / s1 - (w0 * y0).sum(axis=-1) / s0
    return np.where((s1 > 0) & (s0 > 0), out, np.nan)


def rct_contrast(y1, y0, b) -> np.ndarray:
    """Difference of group means; NaN where a group is empty."""
    b = np.asarray(b, dtype=bool)
    k1 = b.sum(axis=-1)
    k0 = b.shape[-1] - k1
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(b, y1, 0.0).sum(axis=-1) / k1 - np.where(b, 0.0, y0).sum(axis=-1) / k0
    return np.where((k1 > 0) & (k0 > 0), out, np.nan)


def f_term(y1, y0, p, b) -> np.ndarray:
    """Assignment-noise term ``f(B) = ipw(y) - mean(y1 - y0)``, written out term by term.

    ``(1/N)[<y1(B), w-1> + <y0(B), 1> - <y0(D\\B), 1/(w-1)> - <y1(D\\B), 1>]``
    """
    b = np.asarray(b, dtype=bool)
    n = b.shape[-1]
    w = 1.0 / p
    in_b = np.where(b, y1 * (w - 1.0) + y0, 0.0)
    out_b = np.where(b, 0.0, y0 / (w - 1.0) + y1)
    return (in_b.sum(axis=-1) - out_b.sum(axis=-1)) / n


# ---------------------------------------------------------------------------
# object API
# ---------------------------------------------------------------------------


def sample_mean_effect(model: ModelOutcomeTable) -> EffectEstimate:
    return EffectEstimate(float(np.mean(model.ym1 - model.ym0)), "sample_mean_model")


def population_true_effect(table: PotentialOutcomeTable) -> EffectEstimate:
    return EffectEstimate(float(np.mean(table.y1 - table.y0)), "population_true")


def rct_effect(table: PotentialOutcomeTable, realization: AssignmentRealization) -> EffectEstimate:
    """Difference of group means.  With an empty group the value is NaN and flagged."""
    value = float(rct_contrast(table.y1, table.y0, realization.b))
    return EffectEstimate(value, "rct", realization.degenerate_group)


def ipw_effect(y1, y0, realization: AssignmentRealization) -> EffectEstimate:
    value = float(ipw_contrast(np.asarray(y1, float), np.asarray(y0, float), realization.plan.p, realization.b))
    return EffectEstimate(value, "ipw", realization.degenerate_group)


def ipw_effect_selfnorm(y1, y0, realization: AssignmentRealization) -> EffectEstimate:
    value = float(hajek_contrast(np.asarray(y1, float), np.asarray(y0, float), realization.plan.p, realization.b))
    return EffectEstimate(value, "ipw_selfnorm", realization.degenerate_group)


def naive_causal_error(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, realization: AssignmentRealization
) -> CausalErrorEstimate:
    """Model sample-mean effect minus the IPW estimate of the true effect."""
    truth = ipw_effect(table.y1, table.y0, realization)
    return CausalErrorEstimate(sample_mean_effect(model).value - truth.value, "naive", truth.degenerate_group)


def pairs_causal_error(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, realization: AssignmentRealization
) -> CausalErrorEstimate:
    """IPW applied to the model minus IPW applied to the truth, on the same realization."""
    predicted = ipw_effect(model.ym1, model.ym0, realization)
    truth = ipw_effect(table.y1, table.y0, realization)
    return CausalErrorEstimate(predicted.value - truth.value, "pairs", truth.degenerate_group)


def rct_causal_error(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, rct_realization: AssignmentRealization
) -> CausalErrorEstimate:
    truth = rct_effect(table, rct_realization)
    return CausalErrorEstimate(sample_mean_effect(model).value - truth.value, "rct_based", truth.degenerate_group)


def selfnorm_causal_error(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, realization: AssignmentRealization
) -> CausalErrorEstimate:
    truth = ipw_effect_selfnorm(table.y1, table.y0, realization)
    return CausalErrorEstimate(
        sample_mean_effect(model).value - truth.value, "selfnorm_based", truth.degenerate_group
    )


def pairs_selfnorm_causal_error(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, realization: AssignmentRealization
) -> CausalErrorEstimate:
    """Pairs construction on top of the self-normalized functional."""
    predicted = ipw_effect_selfnorm(model.ym1, model.ym0, realization)
    truth = ipw_effect_selfnorm(table.y1, table.y0, realization)
    return CausalErrorEstimate(predicted.value - truth.value, "pairs_selfnorm", truth.degenerate_group)


def decomposition_f(table: PotentialOutcomeTable, realization: AssignmentRealization) -> float:
    return float(f_term(table.y1, table.y0, realization.plan.p, realization.b))


def _model_noise_parts(model: ModelOutcomeTable, table: PotentialOutcomeTable):
    if model.nu is None or model.noise is None:
        raise ValueError("g needs a model produced by apply_hypothetical_model (nu retained)")
    return (
        model.nu_treated * model.noise.v(table.y1),
        model.nu_untreated * model.noise.v(table.y0),
    )


def decomposition_g(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, realization: AssignmentRealization
) -> float:
    """Model-noise term: ``f`` evaluated on ``nu * V(y)`` in place of ``y``."""
    e1, e0 = _model_noise_parts(model, table)
    return float(f_term(e1, e0, realization.plan.p, realization.b))


def _closed_form(a1, a0, p) -> float:
    # per unit: p * ((w-1) a1 + a0)^2 + (1-p) * (a0/(w-1) + a1)^2
    #         = (a1 sqrt((1-p)/p) + a0 sqrt(p/(1-p)))^2
    r = np.sqrt((1.0 - p) / p)
    return float(np.sum((a1 * r + a0 / r) ** 2))


def var_f_closed_form(table: PotentialOutcomeTable, plan: AssignmentPlan) -> float:
    """Exact variance of ``f(B)`` over realizations of ``plan``, outcomes held fixed."""
    return _closed_form(table.y1, table.y0, plan.p) / plan.n**2


def var_g_closed_form(table: PotentialOutcomeTable, plan: AssignmentPlan, noise: NoiseModel) -> float:
    """Exact variance of ``g(nu, B)`` over zero-mean ``nu`` and realizations of ``plan``.

    Outcomes are held fixed, so ``E[V(Y)^2]`` is the realized ``V(y_i)^2``.  With
    one ``nu_i`` shared by both arms the two arms' terms for a unit are not
    independent; their cross product survives and the per-unit contribution is
    the square of ``V(y1) sqrt((1-p)/p) + V(y0) sqrt(p/(1-p))``.  Per-arm noise
    removes the cross term.
    """
    v1 = noise.v(table.y1)
    v0 = noise.v(table.y0)
    if noise.per_arm_noise:
        p = plan.p
        total = np.sum(v1**2 * (1.0 - p) / p + v0**2 * p / (1.0 - p))
    else:
        total = _closed_form(v1, v0, plan.p)
    return noise.sigma2_nu * float(total) / plan.n**2


def var_g_four_term_form(table: PotentialOutcomeTable, plan: AssignmentPlan, noise: NoiseModel) -> float:
    """``(s2/N^2)[<p(w-1)^2 + (1-p), V(y1)^2> + <(1-p)/(w-1) + p, V(y0)^2>]``.

    This treats the four summands of ``g`` as uncorrelated and uses an unsquared
    ``1/(w-1)`` factor.  Kept for comparison only; it is not the variance of ``g``
    (see :func:`var_g_closed_form`).
    """
    p = plan.p
    w = 1.0 / p
    v1 = noise.v(table.y1) ** 2
    v0 = noise.v(table.y0) ** 2
    total = np.dot(p * (w - 1.0) ** 2 + (1.0 - p), v1) + np.dot((1.0 - p) / (w - 1.0) + p, v0)
    return noise.sigma2_nu * float(total) / plan.n**2
