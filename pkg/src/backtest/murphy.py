"""
Murphy diagrams: mean elementary scores over a threshold grid, and a
stationary-bootstrap test of forecast dominance.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Literal, Optional, Union

import numpy as np
import pandas as pd
from arch.bootstrap import StationaryBootstrap

from src.backtest.coverage import EvalSeries
from src.schemas import BootstrapConfig
from src.utils.config import MURPHY_GRID_POINTS
from src.utils.errors import BacktestError
from src.utils.logger import get_logger

logger = get_logger(__name__)

Measure = Literal["VaR", "ES"]
MURPHY_COLUMNS = ["eta", "score", "model", "measure"]


@dataclass(frozen=True)
class MurphyCurve:
    eta: np.ndarray
    score: np.ndarray
    measure: Measure
    model: str = ""

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"eta": self.eta, "score": self.score, "model": self.model, "measure": self.measure})


@dataclass(frozen=True)
class DominanceResult:
    statistic: float
    p_value: float
    replications: int
    measure: Measure
    better: str
    worse: str


def default_grid(evaluations: Iterable[EvalSeries], points: int = MURPHY_GRID_POINTS) -> np.ndarray:
    """
    Equally spaced thresholds from min(r, Q, ES) - sd(r) to max(r, Q) + sd(r)
    over all supplied forecasts, so curves vanish at both ends.
    """
    evaluations = list(evaluations)
    if not evaluations:
        raise BacktestError("Need at least one forecast series for a Murphy grid")
    if points < 2:
        raise BacktestError("Murphy grid needs at least two points")
    r = evaluations[0].r
    spread = float(np.std(r, ddof=1)) if len(r) > 1 else 1.0
    low = min(min(e.r.min(), e.q.min(), e.es.min()) for e in evaluations) - spread
    high = max(max(e.r.max(), e.q.max()) for e in evaluations) + spread
    return np.linspace(low, high, points)


def _as_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise BacktestError("Murphy grid must be a non-empty vector")
    if np.any(np.diff(grid) <= 0):
        raise BacktestError("Murphy grid must be strictly ascending")
    return grid


def elementary_var(evaluation: EvalSeries, grid) -> np.ndarray:
    """(m, len(grid)) matrix of (I(r<=Q) - alpha)(I(eta<=Q) - I(eta<=r))"""
    eta = _as_grid(grid)[None, :]
    r = evaluation.r[:, None]
    q = evaluation.q[:, None]
    hit = (r <= q).astype(float)
    return (hit - evaluation.alpha) * ((eta <= q).astype(float) - (eta <= r).astype(float))


def elementary_es(evaluation: EvalSeries, grid) -> np.ndarray:
    """
    (m, len(grid)) matrix of
    I(eta<=ES)[(1/alpha) I(r<=Q)(Q - r) - (Q - eta)] + I(eta<=r)(r - eta)
    """
    eta = _as_grid(grid)[None, :]
    r = evaluation.r[:, None]
    q = evaluation.q[:, None]
    es = evaluation.es[:, None]
    hit = (r <= q).astype(float)
    below_es = (eta <= es).astype(float)
    below_r = (eta <= r).astype(float)
    return below_es * (hit * (q - r) / evaluation.alpha - (q - eta)) + below_r * (r - eta)


def _elementary(evaluation: EvalSeries, grid, measure: Measure) -> np.ndarray:
    if measure == "VaR":
        return elementary_var(evaluation, grid)
    if measure == "ES":
        return elementary_es(evaluation, grid)
    raise BacktestError(f"Unknown Murphy measure '{measure}'")


def murphy_var(evaluation: EvalSeries, grid) -> MurphyCurve:
    grid = _as_grid(grid)
    return MurphyCurve(grid, elementary_var(evaluation, grid).mean(axis=0), "VaR", evaluation.model)


def murphy_es(evaluation: EvalSeries, grid) -> MurphyCurve:
    grid = _as_grid(grid)
    return MurphyCurve(grid, elementary_es(evaluation, grid).mean(axis=0), "ES", evaluation.model)


def dominance_test(
    better: EvalSeries,
    worse: EvalSeries,
    grid,
    config: Optional[BootstrapConfig] = None,
    measure: Measure = "VaR",
    rng: Optional[np.random.Generator] = None,
) -> DominanceResult:
    """
    Test H0: `better` dominates `worse` (its mean elementary score is no
    larger at every eta).

    The statistic is max over eta of sqrt(m) * mean(S_better - S_worse).
    Its null distribution comes from stationary-bootstrap resamples of the
    per-date difference rows, recentred at the observed means; the p-value
    is the share of bootstrap maxima at or above the observed one.
    """
    config = config or BootstrapConfig()
    if better.m != worse.m or not np.array_equal(better.r, worse.r):
        raise BacktestError("Dominance test needs forecasts of the same returns")
    if better.alpha != worse.alpha:
        raise BacktestError("Dominance test needs forecasts at the same alpha")

    grid = _as_grid(grid)
    diff = _elementary(better, grid, measure) - _elementary(worse, grid, measure)
    m = diff.shape[0]
    mean = diff.mean(axis=0)
    observed = float(np.sqrt(m) * mean.max())

    rng = rng if rng is not None else np.random.default_rng(config.seed)
    bootstrap = StationaryBootstrap(config.block_length, diff, seed=rng)
    exceed = 0
    for data, _ in bootstrap.bootstrap(config.replications):
        resampled = data[0]
        stat = float(np.sqrt(m) * (resampled.mean(axis=0) - mean).max())
        if stat >= observed:
            exceed += 1

    p_value = exceed / config.replications
    logger.info(
        f"Dominance ({measure}) {better.model or 'A'} over {worse.model or 'B'}: "
        f"stat={observed:.4f}, p={p_value:.3f} from {config.replications} resamples"
    )
    return DominanceResult(
        statistic=observed,
        p_value=p_value,
        replications=config.replications,
        measure=measure,
        better=better.model,
        worse=worse.model,
    )


def write_curves(curves: Iterable[MurphyCurve], path: Union[str, Path]) -> Path:
    path = Path(path)
    frame = pd.concat([curve.to_frame() for curve in curves], ignore_index=True)
    frame[MURPHY_COLUMNS].to_csv(path, index=False, float_format="%.10g")
    return path
