import numpy as np
import pytest

from src.market.series import (
    ColumnMapping,
    MarketSeries,
    ingest_csv,
    split,
    summarize,
    summary_table,
    write_csv,
)
from src.utils.errors import DataValidationError


def test_ingest_schema_a(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    assert len(series) == 10
    assert series.dropped == 0
    assert series.dates[0] == np.datetime64("2020-01-02")
    assert series.r[5] == -2.0
    assert series.oc[3] == 0.0
    assert series.rv[-1] == 0.7


def test_ingest_schema_b_derives_returns(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_b.csv")

    # first row only provides the previous close
    assert len(series) == 4
    assert series.dates[0] == np.datetime64("2020-01-03")
    assert series.r[0] == pytest.approx(100 * np.log(102 / 100))
    assert series.oc[0] == pytest.approx(100 * np.log(101 / 100))
    assert series.r[1] == pytest.approx(100 * (np.log(101) - np.log(102)))
    assert series.oc[1] == pytest.approx(100 * (np.log(101.5) - np.log(102)))
    assert series.rv[0] == 0.9


def test_ingest_drops_incomplete_rows(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_missing.csv")

    assert len(series) == 4
    assert series.dropped == 2
    assert np.datetime64("2020-01-03") not in series.dates


def test_ingest_reports_row_of_unparsable_value(fixtures_dir):
    with pytest.raises(DataValidationError, match="row 4"):
        ingest_csv(fixtures_dir / "market_bad.csv")


def test_ingest_rejects_unsorted_dates(fixtures_dir):
    with pytest.raises(DataValidationError, match="not strictly increasing"):
        ingest_csv(fixtures_dir / "market_unsorted.csv")


def test_ingest_custom_column_names(tmp_path):
    path = tmp_path / "renamed.csv"
    path.write_text("Day,ret,overnight,vol\n2021-03-01,0.1,0.2,0.3\n2021-03-02,-0.1,0.0,0.4\n")

    series = ingest_csv(path, ColumnMapping(date="Day", r="ret", oc="overnight", rv="vol"))

    assert len(series) == 2
    assert series.r.tolist() == [0.1, -0.1]


def test_ingest_missing_columns(tmp_path):
    path = tmp_path / "partial.csv"
    path.write_text("date,r\n2021-03-01,0.1\n")

    with pytest.raises(DataValidationError, match="need columns"):
        ingest_csv(path)


def test_negative_rv_rejected():
    with pytest.raises(DataValidationError, match="Negative rv"):
        MarketSeries(
            dates=np.array(["2020-01-02", "2020-01-03"], dtype="datetime64[D]"),
            r=[0.1, 0.2],
            oc=[0.0, 0.0],
            rv=[0.5, -0.1],
        )


def test_series_arrays_are_read_only(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    with pytest.raises(ValueError):
        series.r[0] = 1.0


def test_write_then_ingest_is_exact(fixtures_dir, tmp_path):
    series = ingest_csv(fixtures_dir / "market_a.csv")
    noisy = MarketSeries(
        dates=series.dates,
        r=series.r / 3.0,
        oc=series.oc * np.pi,
        rv=series.rv / 7.0,
    )

    back = ingest_csv(write_csv(noisy, tmp_path / "out.csv"))

    assert np.array_equal(back.dates, noisy.dates)
    assert np.array_equal(back.r, noisy.r)
    assert np.array_equal(back.oc, noisy.oc)
    assert np.array_equal(back.rv, noisy.rv)


def test_summarize_returns(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    stats = summarize(series, "r")

    assert stats.count == 10
    assert stats.mean == pytest.approx(-0.1)
    assert stats.std == pytest.approx(np.sqrt(0.9))
    assert stats.min == -2.0
    assert stats.max == 1.1

    centered = series.r - series.r.mean()
    m2 = np.mean(centered**2)
    assert stats.skewness == pytest.approx(np.mean(centered**3) / m2**1.5)
    assert stats.excess_kurtosis == pytest.approx(np.mean(centered**4) / m2**2 - 3.0)


def test_summarize_zero_variance_flags_moments():
    series = MarketSeries(
        dates=np.arange("2020-01-01", "2020-01-06", dtype="datetime64[D]"),
        r=np.ones(5),
        oc=np.zeros(5),
        rv=np.ones(5),
    )

    stats = summarize(series, "oc")

    assert stats.moments_undefined
    assert stats.skewness is None
    assert stats.excess_kurtosis is None


def test_summarize_needs_four_points(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_b.csv").window(0, 3)

    with pytest.raises(DataValidationError):
        summarize(series, "r")


def test_split_by_index_and_date(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    by_index = split(series, 7)
    # a weekend date splits after the Friday before it
    by_date = split(series, "2020-01-11")

    assert (by_index.n, by_index.m) == (7, 3)
    assert (by_date.n, by_date.m) == (7, 3)
    assert by_date.rule == "date"


@pytest.mark.parametrize("boundary", [0, 10, "2019-12-31", "2020-02-01"])
def test_split_needs_both_periods(fixtures_dir, boundary):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    with pytest.raises(DataValidationError):
        split(series, boundary)


def test_split_enforces_minimum_in_sample(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    with pytest.raises(DataValidationError, match="minimum"):
        split(series, 7, min_in_sample=100)


def test_summary_table_layout(fixtures_dir):
    series = ingest_csv(fixtures_dir / "market_a.csv")

    table = summary_table(series, split(series, 5))

    assert list(table.columns) == ["Period", "Series", "N", "Mean", "Std", "Skewness", "Excess kurtosis", "Min", "Max"]
    assert table["Period"].tolist() == ["In-sample"] * 3 + ["Out-of-sample"] * 3
    assert table["N"].tolist() == [5, 5, 5, 5, 5, 5]
