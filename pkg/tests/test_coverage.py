import numpy as np
import pytest
from scipy.stats import norm

from src.backtest.coverage import (
    EvalSeries,
    cc_test,
    dq_design,
    dq_test,
    independence_lr,
    safe_test,
    transition_counts,
    uc_test,
    vrate,
)
from src.utils.errors import BacktestError


def _normal_eval(rng, m, alpha, model=""):
    """iid N(0, 1) returns against their true quantile, with a wobble so Q varies"""
    q = norm.ppf(alpha) + 0.01 * rng.standard_normal(m)
    return EvalSeries(r=rng.standard_normal(m), q=q, es=q - 0.5, alpha=alpha, model=model)


def test_vrate_counts_strict_violations():
    evaluation = EvalSeries(r=[-3.0, -2.0, 1.0, -2.5], q=[-2.0] * 4, es=[-2.5] * 4, alpha=0.25)

    assert vrate(evaluation) == (2, 0.5)
    assert evaluation.hits().tolist() == [1, 0, 0, 1]


def test_uc_known_values():
    assert uc_test(20, 1000, 0.01).statistic == pytest.approx(7.827, abs=1e-3)
    assert uc_test(0, 500, 0.01).statistic == pytest.approx(-1000 * np.log(0.99), rel=1e-12)
    assert uc_test(0, 500, 0.01).statistic == pytest.approx(10.050, abs=1e-3)


def test_uc_at_nominal_rate():
    result = uc_test(10, 1000, 0.01)

    assert result.statistic == pytest.approx(0.0, abs=1e-12)
    assert result.p_value == pytest.approx(1.0)
    assert result.dof == 1
    assert not result.reject


@pytest.mark.parametrize("count, m", [(-1, 10), (11, 10), (0, 0)])
def test_uc_bad_counts(count, m):
    with pytest.raises(BacktestError):
        uc_test(count, m, 0.05)


def test_cc_alternating_hits():
    hits = np.tile([0, 1], 50)

    assert transition_counts(hits) == (0, 50, 49, 0)
    pooled = 50 * np.log(50 / 99) + 49 * np.log(49 / 99)
    result = cc_test(hits, 0.5)

    # coverage is exact, so the statistic is all independence
    assert result.statistic == pytest.approx(-2 * pooled)
    assert result.dof == 2
    assert result.reject


def test_cc_without_hits_equals_uc():
    hits = np.zeros(250, dtype=int)

    assert independence_lr(hits) == 0.0
    assert cc_test(hits, 0.01).statistic == pytest.approx(uc_test(0, 250, 0.01).statistic)


@pytest.mark.parametrize("hits", [[1], [0, 2, 1]])
def test_cc_input_checks(hits):
    with pytest.raises(BacktestError):
        cc_test(hits, 0.05)


def test_dq_without_violations_lags_zero():
    m, alpha = 400, 0.025
    q = -2.0 + 0.1 * np.sin(np.arange(m))
    evaluation = EvalSeries(r=np.zeros(m), q=q, es=q - 1.0, alpha=alpha)

    result = dq_test(evaluation, lags=0)

    assert result.statistic == pytest.approx(m * alpha / (1 - alpha), rel=1e-9)
    assert result.dof == 2


def test_dq_matches_matrix_formula(rng):
    evaluation = _normal_eval(rng, 600, 0.05)

    response, design = dq_design(evaluation, lags=4)
    beta = np.linalg.solve(design.T @ design, design.T @ response)
    expected = beta @ design.T @ design @ beta / (0.05 * 0.95)

    assert design.shape == (596, 6)
    assert dq_test(evaluation, lags=4).statistic == pytest.approx(expected, rel=1e-8)


def test_dq_design_lag_columns(rng):
    evaluation = _normal_eval(rng, 50, 0.1)
    centered = evaluation.hits() - 0.1

    response, design = dq_design(evaluation, lags=2)

    assert np.array_equal(response, centered[2:])
    assert np.array_equal(design[:, 1], centered[1:-1])
    assert np.array_equal(design[:, 2], centered[:-2])
    assert np.array_equal(design[:, 3], evaluation.q[2:])


def test_dq_singular_design():
    m = 100
    evaluation = EvalSeries(r=np.zeros(m), q=np.full(m, -2.0), es=np.full(m, -3.0), alpha=0.05)

    with pytest.raises(BacktestError, match="singular"):
        dq_test(evaluation, lags=4)
    assert safe_test(dq_test, evaluation, 4) is None


def test_dq_needs_enough_observations(rng):
    with pytest.raises(BacktestError):
        dq_test(_normal_eval(rng, 6, 0.5), lags=4)


def test_ordering_matters_only_for_dynamic_tests(rng):
    evaluation = _normal_eval(rng, 500, 0.1)
    shuffled = evaluation.take(rng.permutation(500))

    assert vrate(shuffled) == vrate(evaluation)
    assert cc_test(shuffled.hits(), 0.1).statistic != pytest.approx(cc_test(evaluation.hits(), 0.1).statistic)
    assert dq_test(shuffled).statistic != pytest.approx(dq_test(evaluation).statistic)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"r": [0.1, 0.2], "q": [-1.0], "es": [-2.0]},
        {"r": [0.1], "q": [-1.0], "es": [-0.5]},
        {"r": [np.nan], "q": [-1.0], "es": [-2.0]},
        {"r": [], "q": [], "es": []},
    ],
)
def test_eval_series_validation(kwargs):
    with pytest.raises(BacktestError):
        EvalSeries(alpha=0.05, **kwargs)


@pytest.mark.slow
def test_coverage_tests_hold_size():
    rng = np.random.default_rng(77)
    rejections = {"uc": 0, "cc": 0, "dq": 0}
    replications = 1000
    for _ in range(replications):
        evaluation = _normal_eval(rng, 1000, 0.05)
        count, _ = vrate(evaluation)
        rejections["uc"] += uc_test(count, evaluation.m, 0.05).reject
        rejections["cc"] += cc_test(evaluation.hits(), 0.05).reject
        rejections["dq"] += dq_test(evaluation).reject

    for name, count in rejections.items():
        assert count / replications == pytest.approx(0.05, abs=0.03), name
