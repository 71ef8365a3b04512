"""Empirical check of the multiplicative model-error assumption.

Fit a polynomial modulation ``V`` to the model errors ``d_t = ym_t - y_t``,
recover the implied noise ``nu_hat = d / V(y)``, then measure how strongly
``nu_hat`` correlates with the factual outcome and with the assignment.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats

from .assignment import AssignmentRealization
from .errors import FitError
from .model_sim import ModelOutcomeTable
from .scm_data import PotentialOutcomeTable

__all__ = [
    "PearsonResult",
    "VFit",
    "ValidationReport",
    "fit_v_and_residuals",
    "independence_tests",
    "pearson",
    "validate_assumption",
]

V_MIN = 1e-8


@dataclass(frozen=True)
class VFit:
    """Fitted modulation polynomial and recovered noise for both arms.

    ``coeffs`` are in increasing degree (``coeffs_control`` is set only for
    per-arm fits).  ``nu_hat1``/``nu_hat0`` are NaN where ``|V(y)| < 1e-8``.
    ``residual`` is the mean squared violation of the fitted relation (unit-norm
    coefficients for the cross-arm fit), so nested degrees compare directly.
    """

    coeffs: np.ndarray
    nu_hat1: np.ndarray
    nu_hat0: np.ndarray
    n_excluded: int
    residual: float
    method: str
    coeffs_control: np.ndarray | None = None

    @property
    def nu_hat(self) -> np.ndarray:
        """Both arms pooled, excluded entries dropped."""
        both = np.concatenate([self.nu_hat1, self.nu_hat0])
        return both[np.isfinite(both)]

    @property
    def sigma2_nu(self) -> float:
        return float(np.var(self.nu_hat))


def _vander(y, degree):
    return np.vander(y, degree + 1, increasing=True)


def _normalize(c: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(c) > 1e-12 * np.abs(c).max())
    lead = c[nz[-1]]
    return c / lead


def fit_v_and_residuals(
    model: ModelOutcomeTable, table: PotentialOutcomeTable, degree: int = 1, per_arm: bool = False
) -> VFit:
    """Fit ``d_t = V(y_t) * nu`` with a polynomial ``V`` of the given degree.

    With one ``nu_i`` per unit the two arms give ``d1 V(y0) - d0 V(y1) = 0``,
    which is linear and homogeneous in the coefficients; the fit is the right
    singular vector of the smallest singular value.  This pins ``V`` up to a
    scale, fixed by making the leading coefficient +1, and recovers ``nu``
    exactly when the data follow the relation.  When both arms carry no
    information about ``V`` (e.g. ``y1 == y0`` and shared noise) the fit falls
    back to least squares of ``|d|`` on powers of ``|y|``.
    """
    if degree < 0:
        raise ValueError("degree must be non-negative")
    n = table.n
    if n <= degree + 2:
        raise FitError(f"need more than {degree + 2} units for a degree-{degree} fit")
    y1, y0 = table.y1, table.y0
    d1, d0 = model.ym1 - y1, model.ym0 - y0
    scale = float(np.max(np.abs(np.concatenate([d1, d0]))))
    if scale == 0.0:
        zeros = np.zeros(n)
        coeffs = np.zeros(degree + 1)
        coeffs[-1] = 1.0
        return VFit(coeffs, zeros, zeros.copy(), 0, 0.0, "exact")

    # column scaling keeps the Vandermonde blocks conditioned
    ymax = max(np.max(np.abs(y1)), np.max(np.abs(y0)), 1.0)
    powers = ymax ** np.arange(degree + 1)
    a1 = d1[:, None] * _vander(y0 / ymax, degree)
    a0 = d0[:, None] * _vander(y1 / ymax, degree)
    system = np.hstack([a1, -a0]) if per_arm else a1 - a0
    _, s, vt = np.linalg.svd(system / scale, full_matrices=False)

    coeffs_control = None
    if s[0] > 1e-10 * math.sqrt(n):
        c = vt[-1]
        residual = float(s[-1] ** 2) / n
        method = "cross_arm"
        if per_arm:
            c1 = c[degree + 1 :] / powers  # V applied to y1
            c0 = c[: degree + 1] / powers  # V applied to y0
            norm = c1[np.flatnonzero(np.abs(c1) > 1e-12 * np.abs(c1).max())[-1]]
            coeffs, coeffs_control = c1 / norm, c0 / norm
        else:
            coeffs = _normalize(c / powers)
    else:
        ay = np.concatenate([np.abs(y1), np.abs(y0)])
        ad = np.concatenate([np.abs(d1), np.abs(d0)])
        basis = _vander(ay / ymax, degree)
        c, *_ = np.linalg.lstsq(basis, ad / scale, rcond=None)
        residual = float(np.mean((basis @ c - ad / scale) ** 2))
        coeffs = _normalize(c / powers)
        method = "magnitude"

    def v_of(y, cf):
        if method == "magnitude":
            return np.polynomial.polynomial.polyval(np.abs(y), cf)
        return np.polynomial.polynomial.polyval(y, cf)

    v1 = v_of(y1, coeffs)
    v0 = v_of(y0, coeffs if coeffs_control is None else coeffs_control)
    ok1, ok0 = np.abs(v1) >= V_MIN, np.abs(v0) >= V_MIN
    if not (ok1.any() or ok0.any()):
        raise FitError("fitted V vanishes on every unit")
    with np.errstate(divide="ignore", invalid="ignore"):
        nu1 = np.where(ok1, d1 / v1, np.nan)
        nu0 = np.where(ok0, d0 / v0, np.nan)
    excluded = int((~ok1).sum() + (~ok0).sum())
    return VFit(coeffs, nu1, nu0, excluded, residual, method, coeffs_control)


@dataclass(frozen=True)
class PearsonResult:
    r: float
    p_value: float
    defined: bool = True


def pearson(x, y) -> PearsonResult:
    """Pearson correlation with the exact two-sided t-test p-value (n - 2 dof).

    A constant input gives ``r = nan, p = nan, defined = False``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.shape[0]
    if n != y.shape[0] or n < 3:
        raise ValueError("pearson needs two aligned vectors of length >= 3")
    xc = x - x.mean()
    yc = y - y.mean()
    sxx = math.fsum(xc * xc)
    syy = math.fsum(yc * yc)
    if sxx == 0.0 or syy == 0.0:
        return PearsonResult(math.nan, math.nan, False)
    r = math.fsum(xc * yc) / math.sqrt(sxx * syy)
    r = max(-1.0, min(1.0, r))
    dof = n - 2
    if abs(r) == 1.0:
        return PearsonResult(r, 0.0)
    t = r * math.sqrt(dof / (1.0 - r * r))
    return PearsonResult(r, float(2.0 * stats.t.sf(abs(t), dof)))


@dataclass(frozen=True)
class ValidationReport:
    v_coeffs: list
    corr_y: float
    corr_b: float
    p_y: float
    p_b: float
    n: int
    sigma2_nu_hat: float = math.nan
    n_excluded: int = 0
    defined: bool = True

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return json.dumps({k: clean(v) for k, v in asdict(self).items()}, indent=2)

    def render(self) -> str:
        lines = [
            f"{'n':<16}{self.n:>14d}",
            f"{'V coefficients':<16}{' '.join(f'{c:.6g}' for c in self.v_coeffs):>14}",
            f"{'sigma2_nu_hat':<16}{self.sigma2_nu_hat:>14.6g}",
            f"{'corr(nu, Y^T)':<16}{self.corr_y:>14.6f}",
            f"{'p(nu, Y^T)':<16}{self.p_y:>14.6f}",
            f"{'corr(nu, b)':<16}{self.corr_b:>14.6f}",
            f"{'p(nu, b)':<16}{self.p_b:>14.6f}",
        ]
        return "\n".join(lines)


def independence_tests(nu_hat, y, b, v_coeffs=(), sigma2_nu_hat=math.nan, n_excluded=0) -> ValidationReport:
    """Pearson correlation of ``nu_hat`` with ``y`` and with ``b``, plus p-values.

    Entries where ``nu_hat`` is NaN are dropped from both tests.
    """
    nu_hat = np.asarray(nu_hat, dtype=float)
    keep = np.isfinite(nu_hat)
    ry = pearson(nu_hat[keep], np.asarray(y, dtype=float)[keep])
    rb = pearson(nu_hat[keep], np.asarray(b, dtype=float)[keep])
    return ValidationReport(
        v_coeffs=[float(c) for c in v_coeffs],
        corr_y=ry.r,
        corr_b=rb.r,
        p_y=ry.p_value,
        p_b=rb.p_value,
        n=int(keep.sum()),
        sigma2_nu_hat=float(sigma2_nu_hat),
        n_excluded=int(n_excluded),
        defined=ry.defined and rb.defined,
    )


def validate_assumption(
    model: ModelOutcomeTable,
    table: PotentialOutcomeTable,
    realization: AssignmentRealization,
    degree: int = 1,
    per_arm: bool = False,
) -> ValidationReport:
    """Full pipeline: fit ``V`` on both arms, then test the factual-arm ``nu_hat``.

    Each unit contributes the residual of the arm it was assigned to, paired with
    its factual outcome ``Y^T`` and its assignment ``b``.
    """
    fit = fit_v_and_residuals(model, table, degree, per_arm)
    b = realization.treated
    nu = np.where(b, fit.nu_hat1, fit.nu_hat0)
    y = np.where(b, table.y1, table.y0)
    return independence_tests(nu, y, b.astype(float), fit.coeffs, fit.sigma2_nu, fit.n_excluded)
