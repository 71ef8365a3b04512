import numpy as np
import pytest

from causal_pairs.assignment import (
    DEFAULT_CLIP,
    AssignmentPlan,
    AssignmentRealization,
    draw_base_probabilities,
    plan_logistic,
    plan_rct,
    plan_subsample,
    sample_realization,
)
from causal_pairs.errors import ConfigError
from causal_pairs.scm_data import generate


def test_rct_plan():
    plan = plan_rct(4)
    np.testing.assert_array_equal(plan.p, [0.5] * 4)
    np.testing.assert_array_equal(plan.weights, [2.0] * 4)
    assert plan.scheme == "rct"


def test_rct_needs_two_units():
    with pytest.raises(ConfigError):
        plan_rct(1)


def test_logistic_zero_variance_is_rct():
    x = np.random.default_rng(0).normal(size=(50, 3))
    plan = plan_logistic(x, 0.0, seed=4)
    np.testing.assert_array_equal(plan.p, plan_rct(50).p)


def test_logistic_saturates_to_clip():
    plan = plan_logistic(np.array([[-10.0], [10.0]]), 1.0, seed=None, beta=np.array([1.0]))
    np.testing.assert_array_equal(plan.p, [DEFAULT_CLIP, 1 - DEFAULT_CLIP])


def test_logistic_rejects_nonfinite_covariates():
    with pytest.raises(ValueError):
        plan_logistic(np.array([[0.0], [np.nan]]), 1.0, seed=0)


def test_larger_sigma2_beta_gives_more_imbalance():
    x = generate("csuite_2", 2000, 0).covariates
    spread = {s: [np.var(plan_logistic(x, s, seed).p) for seed in range(100)] for s in (1.0, 10.0)}
    assert np.mean(spread[10.0]) > np.mean(spread[1.0])


def test_subsample_identity():
    base = np.array([0.2, 0.5, 0.8, 0.3])
    plan = plan_subsample(base, 4, seed=None, index=np.arange(4))
    np.testing.assert_array_equal(plan.p, base)
    np.testing.assert_array_equal(plan.unit_index, np.arange(4))


def test_subsample_draws_existing_probabilities():
    base = np.array([0.2, 0.5, 0.8])
    plan = plan_subsample(base, 5, seed=3)
    assert set(plan.p) <= set(base)
    np.testing.assert_array_equal(plan.p, base[plan.unit_index])


def test_subsample_too_small():
    with pytest.raises(ConfigError):
        plan_subsample(np.array([0.5, 0.5]), 1, seed=0)


def test_subsample_indices_uniform():
    n, m, draws = 10, 10, 10**4
    counts = np.zeros(n)
    rng = np.random.default_rng(8)
    base = np.full(n, 0.5)
    for _ in range(draws):
        counts += np.bincount(plan_subsample(base, m, rng).unit_index, minlength=n)
    # each count ~ Binomial(m * draws, 1/n)
    expected = m * draws / n
    sd = np.sqrt(m * draws * (1 / n) * (1 - 1 / n))
    assert np.all(np.abs(counts - expected) < 3 * sd)


def test_realization_is_reproducible():
    plan = plan_rct(100)
    a = sample_realization(plan, 5)
    b = sample_realization(plan, 5)
    np.testing.assert_array_equal(a.b, b.b)


def test_realization_near_certain_treatment():
    plan = AssignmentPlan(np.full(10**4, 1 - DEFAULT_CLIP), "logistic")
    frac = sample_realization(plan, 0).b.mean()
    p = 1 - DEFAULT_CLIP
    assert abs(frac - p) < 3 * np.sqrt(p * (1 - p) / 10**4)


def test_realization_marginals_match_plan():
    p = np.array([0.1, 0.35, 0.5, 0.9])
    plan = AssignmentPlan(p, "logistic")
    counts = np.zeros(4)
    for s in range(10**5):
        counts += sample_realization(plan, s).b
    assert np.all(np.abs(counts / 10**5 - p) < 3 * np.sqrt(p * (1 - p) / 10**5))


def test_plan_rejects_out_of_bounds():
    with pytest.raises(ValueError):
        AssignmentPlan(np.array([0.0, 0.5]), "logistic")
    with pytest.raises(ValueError):
        AssignmentPlan(np.array([0.5, 0.9999]), "logistic")


def test_weights_bounded_by_clip():
    x = np.random.default_rng(1).normal(scale=50, size=(500, 1))
    plan = plan_logistic(x, 10.0, seed=2)
    assert plan.weights.max() <= 1 / DEFAULT_CLIP + 1e-9
    assert (1 / (1 - plan.p)).max() <= 1 / DEFAULT_CLIP + 1e-9


def test_degenerate_flag():
    plan = plan_rct(3)
    assert AssignmentRealization(np.ones(3, int), plan).degenerate_group
    assert not AssignmentRealization(np.array([1, 0, 1]), plan).degenerate_group


def test_csv_serialization():
    plan = plan_rct(2)
    assert plan.to_csv() == "unit,p\n0,0.5\n1,0.5\n"
    r = sample_realization(plan, 0)
    lines = r.to_csv().splitlines()
    assert lines[0] == "unit,p,b"
    assert len(lines) == 3


def test_base_probabilities_range():
    p = draw_base_probabilities(1000, 0)
    assert p.min() >= 0.1 and p.max() <= 0.9
