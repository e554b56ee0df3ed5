"""
Multi-criteria model ranking per market, plus per-market and
cross-market rank sums.

The best model on a criterion gets rank 1; tied models share a rank and
the following rank is skipped.
"""
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Union

import numpy as np
import pandas as pd

from src.schemas import BacktestReport
from src.utils.errors import BacktestError, DataValidationError, UsageError
from src.utils.logger import get_logger

logger = get_logger(__name__)

VRATE = "VRate"
ES_METHOD = "ES method (V)"
QUANTILE_SCORE = "Quantile score"
AL_LOG_SCORE = "AL log score"
ESR_BACKTEST = "ESR backtest"
SUM_ROW = "Sum"
TOTAL_ROW = "Total"

CRITERIA = (VRATE, ES_METHOD, QUANTILE_SCORE, AL_LOG_SCORE, ESR_BACKTEST)
DEFAULT_DIRECTIONS: Dict[str, str] = {
    VRATE: "coverage",
    ES_METHOD: "min",
    QUANTILE_SCORE: "min",
    AL_LOG_SCORE: "min",
    ESR_BACKTEST: "min",
}
# printed rates carry few digits; equal distances must compare equal
DISTANCE_DECIMALS = 10
DEFAULT_MARKET = "All"


def competition_ranks(keys: List[tuple]) -> np.ndarray:
    """1 + number of strictly better keys (ties share the smaller rank)"""
    return np.array([1 + sum(other < key for other in keys) for key in keys], dtype=int)


def rank_vrate(rates: Iterable[float], alpha: float) -> np.ndarray:
    """
    Rank by |rate - alpha|; at equal distance the lower (more
    conservative) rate wins.
    """
    rates = [float(rate) for rate in rates]
    keys = [(round(abs(rate - alpha), DISTANCE_DECIMALS), rate) for rate in rates]
    return competition_ranks(keys)


def rank_models(
    criteria: pd.DataFrame,
    alpha: float,
    directions: Optional[Mapping[str, str]] = None,
) -> pd.DataFrame:
    """
    Rank models on each criterion.

    Args:
        criteria: one row per model, one column per criterion; VRate as a
            fraction of days
        alpha: VaR level the VRate column is judged against
        directions: per-criterion "coverage", "min" or "max"; defaults
            cover the five standard criteria

    Returns:
        criteria x models rank table with a trailing Sum row
    """
    directions = {**DEFAULT_DIRECTIONS, **(directions or {})}
    if criteria.empty:
        raise BacktestError("No models to rank")

    ranks = {}
    for column in criteria.columns:
        values = pd.to_numeric(criteria[column], errors="coerce").to_numpy(dtype=float)
        if not np.all(np.isfinite(values)):
            raise BacktestError(f"Criterion '{column}' has non-finite values")
        direction = directions.get(column)
        if direction is None:
            raise BacktestError(f"No ranking direction for criterion '{column}'")
        if direction == "coverage":
            ranks[column] = rank_vrate(values, alpha)
        elif direction == "min":
            ranks[column] = competition_ranks([(v,) for v in values])
        elif direction == "max":
            ranks[column] = competition_ranks([(-v,) for v in values])
        else:
            raise BacktestError(f"Unknown ranking direction '{direction}' for '{column}'")

    table = pd.DataFrame(ranks, index=criteria.index).T
    table.loc[SUM_ROW] = table.sum(axis=0)
    return table.astype(int)


def rank_markets(blocks: Mapping[str, pd.DataFrame], alpha: float, directions: Optional[Mapping[str, str]] = None) -> pd.DataFrame:
    """
    Stack per-market rank tables and append the cross-market Total row.

    Returns:
        rows indexed by (market, criterion); columns are models
    """
    if not blocks:
        raise BacktestError("No markets to rank")

    tables = []
    models = None
    for market, criteria in blocks.items():
        if models is None:
            models = list(criteria.index)
        elif list(criteria.index) != models:
            raise BacktestError(f"Market '{market}' ranks a different model set")
        table = rank_models(criteria, alpha, directions)
        table.index = pd.MultiIndex.from_product([[market], table.index], names=["Market", "Criterion"])
        tables.append(table)

    stacked = pd.concat(tables)
    sums = stacked.xs(SUM_ROW, level="Criterion")
    total = pd.DataFrame(
        [sums.sum(axis=0).to_numpy()],
        columns=stacked.columns,
        index=pd.MultiIndex.from_tuples([(TOTAL_ROW, "")], names=["Market", "Criterion"]),
    )
    return pd.concat([stacked, total]).astype(int)


def criteria_from_reports(
    reports: Iterable[BacktestReport],
    esr_rejections: Optional[Mapping[str, int]] = None,
) -> pd.DataFrame:
    """
    Build the criteria matrix from backtest reports. ESR rejection counts
    come from outside and are optional.
    """
    rows = {}
    for report in reports:
        row = {
            VRATE: report.vrate,
            ES_METHOD: report.v_measure,
            QUANTILE_SCORE: report.quantile_score,
            AL_LOG_SCORE: report.al_log_score,
        }
        if esr_rejections is not None:
            if report.model not in esr_rejections:
                raise BacktestError(f"No ESR rejection count for '{report.model}'")
            row[ESR_BACKTEST] = esr_rejections[report.model]
        rows[report.model] = row

    if not rows:
        raise BacktestError("No reports to rank")
    return pd.DataFrame.from_dict(rows, orient="index")


def read_criteria(path: Union[str, Path]) -> Dict[str, pd.DataFrame]:
    """
    Load a criteria CSV into per-market criteria matrices.

    Expects a `model` column and the VRate, ES method, quantile score and
    AL log score columns; `ESR backtest` and `market` are optional.
    VRate may be given as a percentage in a `VRate (%)` column.
    """
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"Criteria file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    if "model" not in frame.columns:
        raise UsageError(f"{path.name}: missing column 'model'")
    if "VRate (%)" in frame.columns and VRATE not in frame.columns:
        frame[VRATE] = frame["VRate (%)"] / 100.0
    missing = [c for c in CRITERIA[:-1] if c not in frame.columns]
    if missing:
        raise UsageError(f"{path.name}: missing criteria columns {missing}")
    if "market" not in frame.columns:
        frame["market"] = DEFAULT_MARKET

    columns = [c for c in CRITERIA if c in frame.columns]
    return {
        str(market): group.set_index("model")[columns]
        for market, group in frame.groupby("market", sort=False)
    }
