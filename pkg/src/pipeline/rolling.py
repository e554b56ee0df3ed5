"""
Rolling one-step-ahead VaR/ES forecasting.

Each out-of-sample day t is forecast from the carried posterior draws: every
draw's (Q, w) state at t-1 is pushed one step with that draw's own
parameters, then the draws are averaged. Refits replace the carried draws;
between refits the states are advanced through the observed returns.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from sqlalchemy.orm import Session

from src.caviar.recursion import advance_states, default_initial_state
from src.caviar.specs import InitialState, ModelSpec, ParamVector
from src.database.connection import get_db, init_database
from src.database.models import ChainCheckpoint, ForecastRow, ForecastRun, pack_array, unpack_array
from src.market.series import MarketSeries, SampleSplit
from src.mcmc.estimation import Chain, sample
from src.schemas import McmcConfig, RollingConfig
from src.utils.errors import BacktestError, DataValidationError, SamplerError
from src.utils.helpers import SeedLike, array_digest, payload_digest, spawn_seeds
from src.utils.logger import get_logger

logger = get_logger(__name__)

FORECAST_COLUMNS = ["date", "r", "q", "es", "variant", "alpha"]


@dataclass(frozen=True)
class ForecastRecord:
    date: np.datetime64
    r: float
    q: float
    es: float
    variant: str
    alpha: float


@dataclass
class DrawState:
    """Carried posterior draws with their (Q, w) states at series index `index`"""

    betas: np.ndarray
    gammas: np.ndarray
    q: np.ndarray
    w: np.ndarray
    index: int

    @classmethod
    def from_chain(cls, chain: Chain) -> "DrawState":
        return cls(
            betas=chain.betas.copy(),
            gammas=chain.gammas.copy(),
            q=chain.q_state.copy(),
            w=chain.w_state.copy(),
            index=chain.stop - 1,
        )

    def posterior_mean(self) -> ParamVector:
        return ParamVector(beta=self.betas.mean(axis=0), gamma=self.gammas.mean(axis=0))

    def step(self, spec: ModelSpec, series: MarketSeries) -> "DrawState":
        t = self.index + 1
        q, w = advance_states(spec, self.betas, self.gammas, series, self.q, self.w, t, t + 1)
        return DrawState(betas=self.betas, gammas=self.gammas, q=q, w=w, index=t)


def _with_nowcast_row(series: MarketSeries, oc_next: float) -> MarketSeries:
    # r and rv of the appended day are never read by the step that forecasts it
    return MarketSeries(
        dates=np.append(series.dates, series.dates[-1] + np.timedelta64(1, "D")),
        r=np.append(series.r, 0.0),
        oc=np.append(series.oc, oc_next),
        rv=np.append(series.rv, 0.0),
    )


def forecast_next(
    spec: ModelSpec,
    series: MarketSeries,
    chain: Union[Chain, DrawState],
    oc_next: Optional[float] = None,
) -> Tuple[float, float]:
    """
    Posterior-mean (VaR, ES) for the day after the chain's window.

    When that day is already a row of `series` its overnight return is used;
    otherwise `oc_next` must be given for overnight-return variants.
    """
    state = chain if isinstance(chain, DrawState) else DrawState.from_chain(chain)
    if state.betas.shape[0] == 0:
        raise SamplerError("No retained draws to forecast from")

    t = state.index + 1
    if t > len(series):
        raise DataValidationError(f"Draw states end at index {state.index}, beyond the series")
    if t == len(series):
        if oc_next is None and spec.uses_oc:
            raise DataValidationError(f"{spec.variant.value} needs the overnight return of the forecast day")
        series = _with_nowcast_row(series, 0.0 if oc_next is None else oc_next)

    nxt = state.step(spec, series)
    return float(np.mean(nxt.q)), float(np.mean(nxt.q - nxt.w))


class ForecastPipeline:
    """
    Rolling forecast driver:
    1. Fit on the current window (expanding or fixed length)
    2. Forecast the next day from every retained draw
    3. Advance the draw states; refit every `refit_interval` days

    With a run store, rows and the carried draws are checkpointed after each
    day so an interrupted run resumes where it stopped.
    """

    def __init__(
        self,
        spec: ModelSpec,
        mcmc: McmcConfig,
        rolling: RollingConfig,
        seed: SeedLike = None,
        init: Optional[InitialState] = None,
        store_path: Optional[Union[str, Path]] = None,
    ):
        self.spec = spec
        self.mcmc = mcmc
        self.rolling = rolling
        self.seed = seed
        self.init = init
        self.store_path = store_path

    def _window(self, series: MarketSeries, t: int, n: int, base_init: InitialState) -> Tuple[int, InitialState]:
        if self.rolling.window_mode == "expanding":
            return 1, base_init
        start = t - n + 1
        if start == 1:
            return start, base_init
        return start, default_initial_state(series, stop=t, alpha=self.spec.alpha, start=start - 1)

    def _config_digest(self, sample_split: SampleSplit) -> str:
        return payload_digest(
            {
                "mcmc": self.mcmc.model_dump(),
                "rolling": self.rolling.model_dump(),
                "n": sample_split.n,
                "seed": self.seed,
                "init": None if self.init is None else [self.init.q0, self.init.es0],
            }
        )

    def _open_run(self, db: Session, series: MarketSeries, sample_split: SampleSplit) -> ForecastRun:
        key = dict(
            variant=self.spec.variant.value,
            alpha=self.spec.alpha,
            input_digest=array_digest(series.dates.astype("int64"), series.r, series.oc, series.rv),
            config_digest=self._config_digest(sample_split),
        )
        run = db.query(ForecastRun).filter_by(**key).first()
        if run is None:
            run = ForecastRun(**key, n=sample_split.n, m=sample_split.m)
            db.add(run)
            db.flush()
            logger.info(f"New run {run.id} for {self.spec}")
        else:
            logger.info(f"Resuming run {run.id} for {self.spec} after {len(run.rows)} stored days")
        return run

    def _checkpoint(self, db: Session, run_id: int, record: ForecastRecord, step: int, state: DrawState, ordinal: int):
        db.add(
            ForecastRow(
                run_id=run_id,
                step=step,
                date=pd.Timestamp(record.date).date(),
                r=record.r,
                q=record.q,
                es=record.es,
            )
        )
        checkpoint = db.query(ChainCheckpoint).filter_by(run_id=run_id).first()
        if checkpoint is None:
            checkpoint = ChainCheckpoint(run_id=run_id)
            db.add(checkpoint)
        checkpoint.state_index = state.index
        checkpoint.refit_ordinal = ordinal
        checkpoint.draws = pack_array(np.hstack([state.betas, state.gammas]))
        checkpoint.q_state = pack_array(state.q)
        checkpoint.w_state = pack_array(state.w)

    def _restore(self, series: MarketSeries, sample_split: SampleSplit) -> Tuple[Optional[int], List[ForecastRecord], Optional[DrawState]]:
        init_database(self.store_path)
        with get_db() as db:
            run = self._open_run(db, series, sample_split)
            records = [
                ForecastRecord(
                    date=np.datetime64(row.date, "D"),
                    r=row.r,
                    q=row.q,
                    es=row.es,
                    variant=self.spec.variant.value,
                    alpha=self.spec.alpha,
                )
                for row in run.rows
            ]
            state = None
            if run.checkpoint is not None and records:
                draws = unpack_array(run.checkpoint.draws)
                state = DrawState(
                    betas=draws[:, : self.spec.k],
                    gammas=draws[:, self.spec.k :],
                    q=unpack_array(run.checkpoint.q_state),
                    w=unpack_array(run.checkpoint.w_state),
                    index=run.checkpoint.state_index,
                )
            return run.id, records, state

    def run(self, series: MarketSeries, sample_split: SampleSplit) -> List[ForecastRecord]:
        n, m = sample_split.n, sample_split.m
        if m < 1:
            raise DataValidationError("Out-of-sample length must be at least 1")
        if n + m != len(series):
            raise DataValidationError(f"Split n={n}, m={m} does not cover a series of length {len(series)}")

        base_init = self.init or default_initial_state(series, stop=n, alpha=self.spec.alpha)
        interval = self.rolling.refit_interval
        seeds = spawn_seeds(self.seed, -(-m // interval))

        run_id, records, state = None, [], None
        if self.store_path is not None:
            run_id, records, state = self._restore(series, sample_split)
            if len(records) >= m:
                logger.info(f"{self.spec}: run already complete ({m} days)")
                return records[:m]
            if records and (state is None or state.index != n + len(records) - 1):
                raise DataValidationError(
                    f"{self.spec}: stored checkpoint does not match {len(records)} stored days; remove the run store"
                )

        logger.info(
            f"Rolling {self.spec}: n={n}, m={m}, {self.rolling.window_mode} window, refit every {interval} days"
        )
        for i in range(len(records), m):
            t = n + i
            day = series.dates[t]
            ordinal = i // interval

            if i % interval == 0:
                start, window_init = self._window(series, t, n, base_init)
                initial = state.posterior_mean() if (self.rolling.warm_start and state is not None) else None
                try:
                    chain = sample(
                        self.spec,
                        series,
                        window_init,
                        self.mcmc,
                        start=start,
                        stop=t,
                        initial=initial,
                        rng=np.random.default_rng(seeds[ordinal]),
                    )
                except Exception as e:
                    raise SamplerError(f"{self.spec}: refit for {day} failed: {e}") from e
                state = DrawState.from_chain(chain)
                logger.info(f"{self.spec}: refit {ordinal + 1}/{len(seeds)} on [{start}, {t}) for {day}")

            state = state.step(self.spec, series)
            record = ForecastRecord(
                date=day,
                r=float(series.r[t]),
                q=float(np.mean(state.q)),
                es=float(np.mean(state.q - state.w)),
                variant=self.spec.variant.value,
                alpha=self.spec.alpha,
            )
            records.append(record)

            if run_id is not None:
                with get_db() as db:
                    self._checkpoint(db, run_id, record, i, state, ordinal)
                    if i == m - 1:
                        db.query(ForecastRun).filter_by(id=run_id).update({"status": "complete"})

            if (i + 1) % 50 == 0:
                logger.info(f"{self.spec}: {i + 1}/{m} days forecast")

        return records


def run_rolling(
    spec: ModelSpec,
    series: MarketSeries,
    sample_split: SampleSplit,
    mcmc: McmcConfig,
    rolling: RollingConfig,
    seed: SeedLike = None,
    init: Optional[InitialState] = None,
    store_path: Optional[Union[str, Path]] = None,
) -> List[ForecastRecord]:
    return ForecastPipeline(spec, mcmc, rolling, seed=seed, init=init, store_path=store_path).run(series, sample_split)


def records_to_frame(records: List[ForecastRecord]) -> pd.DataFrame:
    frame = pd.DataFrame(
        {
            "date": pd.to_datetime([rec.date for rec in records]).strftime("%Y-%m-%d"),
            "r": [rec.r for rec in records],
            "q": [rec.q for rec in records],
            "es": [rec.es for rec in records],
            "variant": [rec.variant for rec in records],
            "alpha": [rec.alpha for rec in records],
        },
        columns=FORECAST_COLUMNS,
    )
    return frame


def write_forecasts(records: List[ForecastRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records).to_csv(path, index=False, float_format="%.17g")
    return path


def read_forecasts(path: Union[str, Path]) -> pd.DataFrame:
    """Load and validate a forecast CSV (date,r,q,es,variant,alpha)"""
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"Forecast file not found: {path}")
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in FORECAST_COLUMNS if c not in frame.columns]
    if missing:
        raise DataValidationError(f"{path.name}: missing forecast columns {missing}")
    frame = frame.dropna(subset=["r", "q", "es", "variant", "alpha"])
    frame["date"] = pd.to_datetime(frame["date"]).dt.date
    bad = frame["es"] > frame["q"]
    if bad.any():
        raise BacktestError(f"{path.name}: ES above VaR on {int(bad.sum())} rows (first {frame.loc[bad, 'date'].iloc[0]})")
    return frame.reset_index(drop=True)
