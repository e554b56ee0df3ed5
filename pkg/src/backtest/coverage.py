"""
Violation counting and coverage backtests for VaR forecasts
(unconditional coverage, conditional coverage and dynamic quantile).
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
import statsmodels.api as sm
from scipy.stats import chi2
from statsmodels.tsa.tsatools import lagmat

from src.schemas import HypothesisTest
from src.utils.config import DQ_LAGS
from src.utils.errors import BacktestError
from src.utils.helpers import bernoulli_loglik
from src.utils.logger import get_logger

logger = get_logger(__name__)

SIGNIFICANCE_LEVEL = 0.05
# cond(X) above this makes the DQ projection meaningless
DQ_MAX_CONDITION = 1e10


@dataclass(frozen=True, eq=False)
class EvalSeries:
    """Aligned out-of-sample returns and forecasts for one model at one alpha"""

    r: np.ndarray
    q: np.ndarray
    es: np.ndarray
    alpha: float
    model: str = ""
    dates: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("r", "q", "es"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.ndim != 1:
                raise BacktestError(f"{name} must be one-dimensional")
            if not np.all(np.isfinite(arr)):
                raise BacktestError(f"{name} contains non-finite values")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not len(self.r) == len(self.q) == len(self.es):
            raise BacktestError(
                f"Length mismatch: r={len(self.r)}, q={len(self.q)}, es={len(self.es)}"
            )
        if len(self.r) == 0:
            raise BacktestError("Empty evaluation window")
        if not 0.0 < self.alpha < 1.0:
            raise BacktestError(f"alpha must lie in (0, 1), got {self.alpha}")
        if np.any(self.es > self.q):
            raise BacktestError(f"{self.model or 'forecast'}: ES above VaR at some dates")
        if self.dates is not None and len(self.dates) != len(self.r):
            raise BacktestError("dates do not align with returns")

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, alpha: float, model: str = "") -> "EvalSeries":
        """Build from a forecast table with columns date, r, q, es"""
        dates = frame["date"].to_numpy() if "date" in frame else None
        return cls(
            r=frame["r"].to_numpy(dtype=float),
            q=frame["q"].to_numpy(dtype=float),
            es=frame["es"].to_numpy(dtype=float),
            alpha=alpha,
            model=model,
            dates=dates,
        )

    def __len__(self) -> int:
        return len(self.r)

    @property
    def m(self) -> int:
        return len(self.r)

    def hits(self) -> np.ndarray:
        """Violation indicators I(r_t < Q_t)"""
        return (self.r < self.q).astype(int)

    def take(self, order: np.ndarray) -> "EvalSeries":
        """Jointly reindexed copy (used by permutation checks)"""
        return EvalSeries(
            r=self.r[order],
            q=self.q[order],
            es=self.es[order],
            alpha=self.alpha,
            model=self.model,
            dates=None if self.dates is None else np.asarray(self.dates)[order],
        )


def _result(statistic: float, dof: int, level: float = SIGNIFICANCE_LEVEL) -> HypothesisTest:
    # rounding can leave a likelihood ratio a hair below zero
    statistic = max(float(statistic), 0.0)
    p_value = float(chi2.sf(statistic, dof))
    return HypothesisTest(statistic=statistic, p_value=p_value, dof=dof, reject=p_value < level)


def vrate(evaluation: EvalSeries) -> Tuple[int, float]:
    """
    Strict violations r_t < Q_t.

    Returns:
        (count, rate) with rate = count / m
    """
    count = int(evaluation.hits().sum())
    return count, count / evaluation.m


def uc_test(count: int, m: int, alpha: float) -> HypothesisTest:
    """Kupiec unconditional coverage LR test, chi2(1)"""
    if m <= 0:
        raise BacktestError("UC test needs at least one observation")
    if not 0 <= count <= m:
        raise BacktestError(f"Violation count {count} outside [0, {m}]")
    observed = count / m
    lr = -2.0 * (bernoulli_loglik(count, m, alpha) - bernoulli_loglik(count, m, observed))
    return _result(lr, 1)


def transition_counts(hits: np.ndarray) -> Tuple[int, int, int, int]:
    """(n00, n01, n10, n11) over consecutive hit pairs"""
    hits = np.asarray(hits, dtype=int)
    prev, curr = hits[:-1], hits[1:]
    n00 = int(np.sum((prev == 0) & (curr == 0)))
    n01 = int(np.sum((prev == 0) & (curr == 1)))
    n10 = int(np.sum((prev == 1) & (curr == 0)))
    n11 = int(np.sum((prev == 1) & (curr == 1)))
    return n00, n01, n10, n11


def independence_lr(hits: np.ndarray) -> float:
    """Christoffersen first-order Markov independence LR statistic"""
    n00, n01, n10, n11 = transition_counts(hits)
    total = n00 + n01 + n10 + n11
    if total == 0:
        raise BacktestError("Independence test needs at least two observations")

    def rate(ones: int, rows: int) -> float:
        return ones / rows if rows > 0 else 0.0

    pooled = bernoulli_loglik(n01 + n11, total, rate(n01 + n11, total))
    markov = bernoulli_loglik(n01, n00 + n01, rate(n01, n00 + n01)) + bernoulli_loglik(
        n11, n10 + n11, rate(n11, n10 + n11)
    )
    return -2.0 * (pooled - markov)


def cc_test(hits, alpha: float) -> HypothesisTest:
    """Conditional coverage: LR_uc + LR_ind, chi2(2)"""
    hits = np.asarray(hits, dtype=int)
    if hits.ndim != 1 or len(hits) < 2:
        raise BacktestError("CC test needs at least two observations")
    if np.any((hits != 0) & (hits != 1)):
        raise BacktestError("Hit sequence must be 0/1")
    lr_uc = uc_test(int(hits.sum()), len(hits), alpha).statistic
    return _result(lr_uc + independence_lr(hits), 2)


def dq_design(evaluation: EvalSeries, lags: int = DQ_LAGS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Centered hits and regressors for the DQ regression.

    Rows t = lags..m-1 hold [1, Hit_{t-1}, ..., Hit_{t-lags}, Q_t].
    """
    if lags < 0:
        raise BacktestError("DQ lags must be non-negative")
    m = evaluation.m
    if m <= lags + 2:
        raise BacktestError(f"DQ test with {lags} lags needs more than {lags + 2} observations, got {m}")

    centered = evaluation.hits() - evaluation.alpha
    columns = [np.ones(m - lags)]
    if lags > 0:
        columns.append(lagmat(centered, maxlag=lags, trim="both", original="ex")[: m - lags])
    columns.append(evaluation.q[lags:])
    design = np.column_stack(columns)
    return centered[lags:], design


def dq_test(evaluation: EvalSeries, lags: int = DQ_LAGS) -> HypothesisTest:
    """
    Engle-Manganelli dynamic quantile test, chi2(lags + 2).

    Statistic: Hit' X (X'X)^{-1} X' Hit / (alpha (1 - alpha)).
    """
    response, design = dq_design(evaluation, lags)
    condition = float(np.linalg.cond(design))
    if not np.isfinite(condition) or condition > DQ_MAX_CONDITION:
        raise BacktestError(
            f"DQ regressors are singular (condition number {condition:.3g}); "
            "constant forecasts or a hit sequence without variation"
        )

    fitted = sm.OLS(response, design).fit().fittedvalues
    alpha = evaluation.alpha
    statistic = float(fitted @ fitted) / (alpha * (1.0 - alpha))
    return _result(statistic, lags + 2)


def safe_test(test, *args, **kwargs) -> Optional[HypothesisTest]:
    """Run a backtest; an undefined statistic becomes None with a warning"""
    try:
        return test(*args, **kwargs)
    except BacktestError as e:
        logger.warning(f"{getattr(test, '__name__', 'test')} skipped: {e}")
        return None
