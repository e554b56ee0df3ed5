import numpy as np
import pytest

from src.backtest.coverage import EvalSeries
from src.backtest.scores import (
    al_log_score,
    hac_lags,
    quantile_score,
    score_diff_tstat,
    score_differences,
    v_measure,
)
from src.utils.errors import BacktestError


def _eval(r, q, es, alpha, model=""):
    return EvalSeries(r=np.asarray(r, dtype=float), q=np.asarray(q, dtype=float), es=np.asarray(es, dtype=float), alpha=alpha, model=model)


def test_quantile_score_values():
    scores, total = quantile_score(_eval([-3.0, -2.0, 1.0], [-2.0] * 3, [-3.0] * 3, 0.01))

    assert scores[0] == pytest.approx(0.99)
    assert scores[1] == 0.0
    assert scores[2] == pytest.approx(0.03)
    assert total == pytest.approx(1.02)


def test_al_log_score_values():
    scores, _ = al_log_score(_eval([0.5, -2.0], [-2.0, -2.0], [-3.0, -3.0], 0.01))

    assert scores[0] == pytest.approx(-np.log(0.33) + 2.5 / 3.0)
    assert scores[1] == pytest.approx(-np.log(0.33))


def test_al_log_score_needs_negative_es():
    with pytest.raises(BacktestError):
        al_log_score(_eval([0.5], [0.5], [0.0], 0.01))


def test_v_measure_hand_fixture():
    result = v_measure(_eval([-3.0, 1.0, 1.0, 1.0], [-2.0] * 4, [-2.5] * 4, 0.25))

    # delta = (-0.5, 3.5, 3.5, 3.5), type-7 q(0.25) = 2.5
    assert result.v1 == pytest.approx(-0.5)
    assert result.v2 == pytest.approx(-0.5)
    assert result.value == pytest.approx(0.5)
    assert not result.v1_undefined


def test_v_measure_without_violations():
    result = v_measure(_eval([1.0, 2.0, 0.5, 3.0], [-2.0] * 4, [-2.5] * 4, 0.25))

    assert result.v1 is None
    assert result.v1_undefined
    assert result.v2 == pytest.approx(3.0)
    assert result.value == pytest.approx(3.0)


def test_v_measure_with_tied_deltas_uses_the_minimum():
    result = v_measure(_eval([-3.0] * 4, [-2.0] * 4, [-2.5] * 4, 0.25))

    assert result.v2 == pytest.approx(-0.5)


def test_scores_ignore_joint_reordering(rng):
    r = rng.standard_normal(200)
    q = -1.6 + 0.2 * rng.standard_normal(200)
    evaluation = _eval(r, q, q - 0.6, 0.05)
    shuffled = evaluation.take(rng.permutation(200))

    assert quantile_score(shuffled)[1] == pytest.approx(quantile_score(evaluation)[1])
    assert al_log_score(shuffled)[1] == pytest.approx(al_log_score(evaluation)[1])
    assert v_measure(shuffled).value == pytest.approx(v_measure(evaluation).value)


def test_quantile_score_elicits_the_quantile():
    r = np.random.default_rng(0).standard_normal(100_000)
    candidates = np.arange(-2.2, -1.1, 0.001)
    losses = [quantile_score(_eval(r, np.full(r.size, c), np.full(r.size, c - 1.0), 0.05))[1] for c in candidates]

    best = candidates[int(np.argmin(losses))]

    assert best == pytest.approx(-1.6449, abs=0.05)


def test_identical_forecasts_give_zero_statistic(rng):
    r = rng.standard_normal(300)
    q = np.full(300, -2.0)
    with_oc = _eval(r, q, q - 0.5, 0.01, "RES_CAVIAR_OC")
    without_oc = _eval(r, q, q - 0.5, 0.01, "RES_CAVIAR")

    assert score_diff_tstat(with_oc, without_oc, "quantile") == 0.0
    assert score_diff_tstat(with_oc, without_oc, "al") == 0.0


def test_constant_nonzero_differences_are_rejected():
    r = np.ones(50)
    with_oc = _eval(r, np.full(50, -2.0), np.full(50, -3.0), 0.01)
    without_oc = _eval(r, np.full(50, -3.0), np.full(50, -4.0), 0.01)

    with pytest.raises(BacktestError):
        score_diff_tstat(with_oc, without_oc)


def test_difference_sign_favours_overnight_information(rng):
    r = rng.standard_normal(2000)
    good = _eval(r, np.full(2000, -2.326), np.full(2000, -2.665), 0.01)
    bad = _eval(r, np.full(2000, -0.5), np.full(2000, -1.0), 0.01)

    assert score_differences(good, bad, "quantile").mean() > 0
    assert score_diff_tstat(good, bad, "quantile") > 2.0
    assert score_diff_tstat(bad, good, "quantile") < -2.0


def test_hac_statistic_close_to_classical_t_on_iid_differences():
    rng = np.random.default_rng(2718)
    m = 10_000
    r = rng.standard_normal(m)
    with_oc = _eval(r, -1.6 + 0.3 * rng.standard_normal(m), np.full(m, -5.0), 0.05)
    without_oc = _eval(r, -1.8 + 0.3 * rng.standard_normal(m), np.full(m, -5.0), 0.05)

    diff = score_differences(with_oc, without_oc, "quantile")
    classical = np.sqrt(m) * diff.mean() / diff.std(ddof=1)

    assert hac_lags(m) == 21
    # Bartlett weights over 21 lags add a few percent of sampling noise
    assert score_diff_tstat(with_oc, without_oc) == pytest.approx(classical, rel=0.1)


def test_score_differences_need_aligned_series(rng):
    r = rng.standard_normal(20)
    base = _eval(r, np.full(20, -2.0), np.full(20, -3.0), 0.01)

    with pytest.raises(BacktestError):
        score_differences(base, _eval(r[:10], np.full(10, -2.0), np.full(10, -3.0), 0.01), "quantile")
    with pytest.raises(BacktestError):
        score_differences(base, _eval(r, np.full(20, -2.0), np.full(20, -3.0), 0.025), "quantile")
    with pytest.raises(BacktestError):
        score_differences(base, _eval(r + 1.0, np.full(20, -2.0), np.full(20, -3.0), 0.01), "quantile")
