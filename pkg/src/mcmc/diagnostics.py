"""
Posterior summaries and convergence diagnostics
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd
from statsmodels.tsa.stattools import acf as sm_acf

from src.mcmc.estimation import Chain
from src.utils.errors import SamplerError
from src.utils.helpers import ensure_dir, type7_quantile
from src.utils.logger import get_logger

logger = get_logger(__name__)

MIN_SUMMARY_DRAWS = 10
DEFAULT_MAX_LAG = 50
SUMMARY_COLUMNS = ["Mean", "Median", "Std", "2.5%", "97.5%"]


@dataclass(frozen=True)
class PosteriorSummary:
    table: pd.DataFrame

    def __getitem__(self, name: str) -> pd.Series:
        return self.table.loc[name]

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.table.to_csv(path, index_label="Parameter", float_format="%.6f")
        return path


def summarize_draws(draws: np.ndarray, names) -> PosteriorSummary:
    draws = np.atleast_2d(np.asarray(draws, dtype=float))
    if draws.shape[0] < MIN_SUMMARY_DRAWS:
        raise SamplerError(f"Need at least {MIN_SUMMARY_DRAWS} retained draws, got {draws.shape[0]}")

    rows = []
    for column in draws.T:
        low, median, high = type7_quantile(column, [0.025, 0.5, 0.975])
        rows.append(
            {
                "Mean": float(column.mean()),
                "Median": float(median),
                "Std": float(column.std(ddof=1)),
                "2.5%": float(low),
                "97.5%": float(high),
                # interval excludes zero
                "Significant": bool(low > 0.0 or high < 0.0),
            }
        )
    return PosteriorSummary(table=pd.DataFrame(rows, index=pd.Index(list(names), name="Parameter")))


def summarize_chain(chain: Chain) -> PosteriorSummary:
    """Posterior summary: mean, median, std and 95% interval per parameter"""
    return summarize_draws(chain.draws, chain.param_names)


def acf(values, max_lag: int) -> np.ndarray:
    """Sample autocorrelations at lags 0..max_lag (biased denominator)"""
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or len(values) <= max_lag:
        raise SamplerError(f"Need more than {max_lag} draws for the ACF, got {len(values)}")
    if np.var(values) == 0.0:
        raise SamplerError("ACF undefined for a zero-variance draw sequence")
    return sm_acf(values, nlags=max_lag, adjusted=False, fft=False)


def export_diagnostics(
    chain: Chain,
    directory: Union[str, Path],
    max_lag: Optional[int] = None,
    prefix: str = "",
) -> Dict[str, Path]:
    """
    Write plot-ready trace and ACF tables.

    Returns:
        {"trace": path, "acf": path}
    """
    directory = ensure_dir(directory)
    names = chain.param_names
    lag = min(DEFAULT_MAX_LAG if max_lag is None else max_lag, len(chain) - 1)

    trace = pd.DataFrame(chain.draws, columns=names)
    trace.insert(0, "iteration", chain.retained_iterations)
    trace = trace.melt(id_vars="iteration", var_name="parameter", value_name="value")

    acf_rows = []
    for i, name in enumerate(names):
        column = chain.draws[:, i]
        if np.var(column) == 0.0:
            logger.warning(f"{chain.spec}: '{name}' never moved; ACF skipped")
            continue
        for k, value in enumerate(acf(column, lag)):
            acf_rows.append({"lag": k, "parameter": name, "acf": value})
    acf_table = pd.DataFrame(acf_rows, columns=["lag", "parameter", "acf"])

    paths = {
        "trace": directory / f"{prefix}trace.csv",
        "acf": directory / f"{prefix}acf.csv",
    }
    trace.to_csv(paths["trace"], index=False, float_format="%.10g")
    acf_table.to_csv(paths["acf"], index=False, float_format="%.10g")
    logger.info(f"Diagnostics written to {directory}")
    return paths
