"""
Daily market series: ingestion, validation, summary statistics and splits.

Two CSV layouts are understood:
    schema A: date, r, oc, rv          (returns already computed, x100)
    schema B: date, open, close, rv    (raw prices, returns derived here)

The rv column is taken as a volatility in return-x100 units; it is never
squared or rescaled.
"""
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from dateutil.parser import isoparse
from scipy import stats

from src.utils.errors import DataValidationError
from src.utils.logger import get_logger

logger = get_logger(__name__)

SERIES_FIELDS = ("r", "oc", "rv")
SUMMARY_COLUMNS = ["Mean", "Std", "Skewness", "Excess kurtosis", "Min", "Max"]

DateLike = Union[date, datetime, np.datetime64, str]


@dataclass(frozen=True)
class ColumnMapping:
    """Header names in the input file; overridable from the CLI"""

    date: str = "date"
    r: str = "r"
    oc: str = "oc"
    rv: str = "rv"
    open: str = "open"
    close: str = "close"


@dataclass(frozen=True, eq=False)
class MarketSeries:
    dates: np.ndarray
    r: np.ndarray
    oc: np.ndarray
    rv: np.ndarray
    dropped: int = 0

    def __post_init__(self):
        dates = np.array(self.dates, dtype="datetime64[D]")
        arrays = {name: np.asarray(getattr(self, name), dtype=float) for name in SERIES_FIELDS}

        length = len(dates)
        if length < 2:
            raise DataValidationError(f"Series needs at least 2 rows, got {length}")
        for name, arr in arrays.items():
            if arr.ndim != 1 or len(arr) != length:
                raise DataValidationError(f"Column '{name}' has length {len(arr)}, expected {length}")
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise DataValidationError(f"Column '{name}' has a non-finite value at index {bad[0]}")

        steps = np.diff(dates)
        if np.any(steps <= np.timedelta64(0, "D")):
            idx = int(np.flatnonzero(steps <= np.timedelta64(0, "D"))[0]) + 1
            raise DataValidationError(f"Dates are not strictly increasing at index {idx} ({dates[idx]})")

        negative = np.flatnonzero(arrays["rv"] < 0)
        if negative.size:
            raise DataValidationError(f"Negative rv at index {negative[0]}")

        object.__setattr__(self, "dates", dates)
        for name, arr in arrays.items():
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        dates.setflags(write=False)

    def __len__(self) -> int:
        return len(self.dates)

    def window(self, start: int, stop: int) -> "MarketSeries":
        """Rows [start, stop) as a new series"""
        if not 0 <= start < stop <= len(self):
            raise DataValidationError(f"Window [{start}, {stop}) outside series of length {len(self)}")
        return MarketSeries(
            dates=self.dates[start:stop],
            r=self.r[start:stop],
            oc=self.oc[start:stop],
            rv=self.rv[start:stop],
        )

    def index_of(self, day: DateLike) -> int:
        """Position of an exact trading day"""
        target = _as_day(day)
        pos = int(np.searchsorted(self.dates, target))
        if pos >= len(self) or self.dates[pos] != target:
            raise DataValidationError(f"{target} is not a trading day in the series")
        return pos

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "date": pd.to_datetime(self.dates).strftime("%Y-%m-%d"),
                "r": self.r,
                "oc": self.oc,
                "rv": self.rv,
            }
        )


@dataclass(frozen=True)
class SampleSplit:
    n: int
    m: int
    rule: str
    boundary_date: Optional[np.datetime64] = None

    @property
    def total(self) -> int:
        return self.n + self.m


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    std: float
    skewness: Optional[float]
    excess_kurtosis: Optional[float]
    min: float
    max: float
    moments_undefined: bool = field(default=False)

    def to_row(self) -> Dict[str, Optional[float]]:
        return dict(
            zip(
                SUMMARY_COLUMNS,
                [self.mean, self.std, self.skewness, self.excess_kurtosis, self.min, self.max],
            )
        )


def _as_day(value: DateLike) -> np.datetime64:
    if isinstance(value, str):
        value = isoparse(value)
    if isinstance(value, datetime):
        value = value.date()
    return np.datetime64(value, "D")


def _row_number(position: int) -> int:
    # header is line 1
    return position + 2


def _numeric_column(frame: pd.DataFrame, column: str) -> pd.Series:
    raw = frame[column]
    present = raw.notna() & (raw.str.strip() != "")
    parsed = pd.to_numeric(raw.where(present), errors="coerce")
    bad = present & parsed.isna()
    if bad.any():
        pos = int(np.flatnonzero(bad.to_numpy())[0])
        raise DataValidationError(
            f"Unparsable value {raw.iloc[pos]!r} in column '{column}' at row {_row_number(pos)}"
        )
    # exact decimal parsing for the kept cells
    values = pd.Series(np.nan, index=frame.index)
    values[present] = raw[present].str.strip().astype(float)
    return values


def _date_column(frame: pd.DataFrame, column: str) -> pd.Series:
    raw = frame[column]
    present = raw.notna() & (raw.str.strip() != "")
    parsed = pd.Series(pd.NaT, index=frame.index, dtype="datetime64[ns]")
    for pos in np.flatnonzero(present.to_numpy()):
        text = raw.iloc[pos].strip()
        try:
            parsed.iloc[pos] = pd.Timestamp(isoparse(text).date())
        except (ValueError, OverflowError):
            raise DataValidationError(
                f"Unparsable date {text!r} at row {_row_number(pos)}"
            ) from None
    return parsed


def ingest_csv(path: Union[str, Path], schema: Optional[ColumnMapping] = None) -> MarketSeries:
    """
    Read a daily market CSV into a validated MarketSeries.

    Args:
        path: CSV file with a header row
        schema: column names; defaults to the standard headers

    Returns:
        MarketSeries whose `dropped` counts rows removed for missing cells
    """
    schema = schema or ColumnMapping()
    path = Path(path)
    if not path.exists():
        raise DataValidationError(f"Input file not found: {path}")

    frame = pd.read_csv(path, dtype=str, keep_default_na=True, encoding="utf-8")
    frame.columns = [c.strip() for c in frame.columns]
    columns = set(frame.columns)

    if {schema.date, schema.r, schema.oc, schema.rv} <= columns:
        layout = "A"
        wanted = [schema.date, schema.r, schema.oc, schema.rv]
    elif {schema.date, schema.open, schema.close, schema.rv} <= columns:
        layout = "B"
        wanted = [schema.date, schema.open, schema.close, schema.rv]
    else:
        raise DataValidationError(
            f"{path.name}: need columns ({schema.date}, {schema.r}, {schema.oc}, {schema.rv}) "
            f"or ({schema.date}, {schema.open}, {schema.close}, {schema.rv}); found {sorted(columns)}"
        )

    parsed = pd.DataFrame({schema.date: _date_column(frame, schema.date)})
    for column in wanted[1:]:
        parsed[column] = _numeric_column(frame, column)
    parsed["row"] = np.arange(len(frame)) + 2

    complete = parsed.notna().all(axis=1)
    dropped = int((~complete).sum())
    if dropped:
        logger.warning(f"{path.name}: dropped {dropped} rows with missing values (rows {parsed.loc[~complete, 'row'].tolist()[:10]})")
    parsed = parsed[complete].reset_index(drop=True)

    if parsed.empty:
        raise DataValidationError(f"{path.name}: no complete rows after dropping missing values")

    dates = parsed[schema.date].to_numpy(dtype="datetime64[D]")
    steps = np.diff(dates)
    if np.any(steps <= np.timedelta64(0, "D")):
        pos = int(np.flatnonzero(steps <= np.timedelta64(0, "D"))[0]) + 1
        raise DataValidationError(
            f"{path.name}: dates not strictly increasing at row {parsed['row'].iloc[pos]}"
        )

    rv = parsed[schema.rv].to_numpy()
    if np.any(rv < 0):
        pos = int(np.flatnonzero(rv < 0)[0])
        raise DataValidationError(f"{path.name}: negative rv at row {parsed['row'].iloc[pos]}")

    if layout == "A":
        r = parsed[schema.r].to_numpy()
        oc = parsed[schema.oc].to_numpy()
    else:
        opens = parsed[schema.open].to_numpy()
        closes = parsed[schema.close].to_numpy()
        nonpositive = (opens <= 0) | (closes <= 0)
        if nonpositive.any():
            pos = int(np.flatnonzero(nonpositive)[0])
            raise DataValidationError(f"{path.name}: non-positive price at row {parsed['row'].iloc[pos]}")
        log_open, log_close = np.log(opens), np.log(closes)
        r = 100.0 * (log_close[1:] - log_close[:-1])
        oc = 100.0 * (log_open[1:] - log_close[:-1])
        dates, rv = dates[1:], rv[1:]

    if len(dates) == 0:
        raise DataValidationError(f"{path.name}: empty series after differencing prices")

    series = MarketSeries(dates=dates, r=r, oc=oc, rv=rv, dropped=dropped)
    logger.info(f"Ingested {len(series)} rows from {path.name} (schema {layout}, {dropped} dropped)")
    return series


def write_csv(series: MarketSeries, path: Union[str, Path]) -> Path:
    """Schema-A writer; ingest_csv reads its output back bit-for-bit"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    series.to_frame().to_csv(path, index=False, float_format="%.17g")
    return path


def summarize(series: MarketSeries, field: str) -> SummaryStats:
    """Sample moments for one of r, oc, rv"""
    if field not in SERIES_FIELDS:
        raise DataValidationError(f"Unknown field '{field}', expected one of {SERIES_FIELDS}")

    values = getattr(series, field)
    if len(values) < 4:
        raise DataValidationError(f"Need at least 4 observations to summarize '{field}', got {len(values)}")

    std = float(np.std(values, ddof=1))
    undefined = std == 0.0
    if undefined:
        logger.warning(f"'{field}' has zero variance; skewness and kurtosis undefined")

    return SummaryStats(
        count=len(values),
        mean=float(np.mean(values)),
        std=std,
        skewness=None if undefined else float(stats.skew(values, bias=True)),
        excess_kurtosis=None if undefined else float(stats.kurtosis(values, fisher=True, bias=True)),
        min=float(np.min(values)),
        max=float(np.max(values)),
        moments_undefined=undefined,
    )


def split(series: MarketSeries, boundary: Union[int, DateLike], min_in_sample: int = 1) -> SampleSplit:
    """
    Partition into in-sample [0, n) and out-of-sample [n, n + m).

    An integer boundary is the in-sample length. A date boundary keeps every
    trading day up to and including it in-sample, so a date falling between
    two trading days splits after the earlier one.
    """
    total = len(series)
    if isinstance(boundary, (int, np.integer)) and not isinstance(boundary, bool):
        n, rule, boundary_date = int(boundary), "index", None
    else:
        boundary_date = _as_day(boundary)
        n = int(np.searchsorted(series.dates, boundary_date, side="right"))
        rule = "date"

    if not 1 <= n < total:
        raise DataValidationError(
            f"Split boundary {boundary} leaves n={n}, m={total - n}; both must be at least 1"
        )
    if n < min_in_sample:
        raise DataValidationError(f"In-sample length {n} below the minimum of {min_in_sample}")

    return SampleSplit(n=n, m=total - n, rule=rule, boundary_date=boundary_date)


def summary_table(series: MarketSeries, sample_split: Optional[SampleSplit] = None) -> pd.DataFrame:
    """Descriptive statistics, one row per (period, field)"""
    periods: List = [("Full", series)]
    if sample_split is not None:
        periods = [
            ("In-sample", series.window(0, sample_split.n)),
            ("Out-of-sample", series.window(sample_split.n, sample_split.total)),
        ]

    rows = []
    for period, part in periods:
        for name in SERIES_FIELDS:
            summary = summarize(part, name)
            rows.append({"Period": period, "Series": name, "N": summary.count, **summary.to_row()})
    return pd.DataFrame(rows, columns=["Period", "Series", "N", *SUMMARY_COLUMNS])
