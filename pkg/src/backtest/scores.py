"""
Elicitable scores for VaR and (VaR, ES) forecasts, the V(alpha) ES
measure and HAC-standardized score differences.
"""
from dataclasses import dataclass
from typing import Literal, Optional, Tuple

import numpy as np
import statsmodels.api as sm

from src.backtest.coverage import EvalSeries
from src.caviar.likelihood import al_log_terms
from src.utils.errors import BacktestError
from src.utils.helpers import type7_quantile
from src.utils.logger import get_logger

logger = get_logger(__name__)

ScoreName = Literal["quantile", "al"]


@dataclass(frozen=True)
class VMeasure:
    v1: Optional[float]
    v2: float
    value: float
    v1_undefined: bool = False


def quantile_score(evaluation: EvalSeries) -> Tuple[np.ndarray, float]:
    """
    Pinball loss (alpha - I(r_t <= Q_t))(r_t - Q_t).

    Returns:
        (per-date scores, sum over the window)
    """
    hit = (evaluation.r <= evaluation.q).astype(float)
    scores = (evaluation.alpha - hit) * (evaluation.r - evaluation.q)
    return scores, float(scores.sum())


def al_log_score(evaluation: EvalSeries) -> Tuple[np.ndarray, float]:
    """Negative AL log-density of r_t given (Q_t, ES_t); needs ES_t < 0"""
    if np.any(evaluation.es >= 0.0):
        raise BacktestError(f"{evaluation.model or 'forecast'}: AL log score undefined for ES >= 0")
    scores = -al_log_terms(evaluation.r, evaluation.q, evaluation.es, evaluation.alpha)
    return scores, float(scores.sum())


def v_measure(evaluation: EvalSeries) -> VMeasure:
    """
    V(alpha) = (|V1| + |V2|) / 2 with delta_t = r_t - ES_t,
    V1 the mean delta over violation dates and V2 the mean delta below
    its own alpha-quantile. Without violations only |V2| is reported.
    """
    delta = evaluation.r - evaluation.es
    violated = evaluation.r < evaluation.q

    threshold = type7_quantile(delta, evaluation.alpha)
    tail = delta < threshold
    if not tail.any():
        # all mass tied at the minimum
        tail = delta <= threshold
    v2 = float(delta[tail].mean())

    if not violated.any():
        logger.warning(f"{evaluation.model or 'forecast'}: no violations, V(alpha) uses V2 only")
        return VMeasure(v1=None, v2=v2, value=abs(v2), v1_undefined=True)

    v1 = float(delta[violated].mean())
    return VMeasure(v1=v1, v2=v2, value=(abs(v1) + abs(v2)) / 2.0)


def hac_lags(m: int) -> int:
    return int(np.floor(m ** (1.0 / 3.0)))


def score_differences(with_oc: EvalSeries, without_oc: EvalSeries, score: ScoreName) -> np.ndarray:
    if with_oc.m != without_oc.m:
        raise BacktestError(f"Windows differ: {with_oc.m} vs {without_oc.m} dates")
    if with_oc.alpha != without_oc.alpha:
        raise BacktestError("Score differences need forecasts at the same alpha")
    if not np.array_equal(with_oc.r, without_oc.r):
        raise BacktestError("Score differences need forecasts of the same returns")
    scorer = quantile_score if score == "quantile" else al_log_score
    return scorer(without_oc)[0] - scorer(with_oc)[0]


def score_diff_tstat(with_oc: EvalSeries, without_oc: EvalSeries, score: ScoreName = "quantile") -> float:
    """
    sqrt(m) * mean / sigma of d_t = S_t(without) - S_t(with), sigma from a
    Newey-West long-run variance with floor(m^(1/3)) lags.

    Positive values favour the forecasts with overnight information.
    """
    diff = score_differences(with_oc, without_oc, score)
    if not np.any(diff):
        return 0.0
    if np.ptp(diff) == 0.0:
        raise BacktestError("Score differences are constant; long-run variance is zero")

    m = len(diff)
    fit = sm.OLS(diff, np.ones(m)).fit(
        cov_type="HAC",
        cov_kwds={"maxlags": hac_lags(m), "use_correction": False},
    )
    variance = float(fit.cov_params()[0, 0])
    if not variance > 0.0:
        raise BacktestError("Long-run variance estimate is not positive")
    return float(fit.params[0] / np.sqrt(variance))
