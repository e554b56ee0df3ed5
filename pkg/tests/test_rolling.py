import numpy as np
import pandas as pd
import pytest

import src.pipeline.rolling as rolling
from src.caviar.recursion import advance_states
from src.market.series import SampleSplit, split
from src.mcmc.estimation import sample
from src.pipeline.rolling import (
    FORECAST_COLUMNS,
    DrawState,
    forecast_next,
    read_forecasts,
    run_rolling,
    write_forecasts,
)
from src.schemas import RollingConfig
from src.utils.errors import BacktestError, DataValidationError, SamplerError
from src.utils.helpers import spawn_seeds

SEED = 42


@pytest.fixture
def refits(monkeypatch):
    """Record the (start, stop) window of every refit"""
    windows = []

    def spy(*args, **kwargs):
        windows.append((kwargs["start"], kwargs["stop"]))
        return sample(*args, **kwargs)

    monkeypatch.setattr(rolling, "sample", spy)
    return windows


def test_one_row_per_out_of_sample_day(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    sample_split = split(series, 280)

    records = run_rolling(res_oc_spec, series, sample_split, small_mcmc, RollingConfig(refit_interval=10), SEED, init_state)

    assert len(records) == 20
    assert [rec.date for rec in records] == list(series.dates[280:])
    assert [rec.r for rec in records] == series.r[280:].tolist()
    assert all(rec.es <= rec.q for rec in records)
    assert {rec.variant for rec in records} == {"RES_CAVIAR_OC"}


def test_refit_interval_and_expanding_window(res_oc_spec, init_state, synthetic_market, small_mcmc, refits):
    series, _ = synthetic_market

    run_rolling(res_oc_spec, series, split(series, 280), small_mcmc, RollingConfig(refit_interval=7), SEED, init_state)

    assert refits == [(1, 280), (1, 287), (1, 294)]


def test_fixed_window_slides(res_oc_spec, synthetic_market, small_mcmc, refits):
    series, _ = synthetic_market
    config = RollingConfig(window_mode="fixed", refit_interval=10)

    run_rolling(res_oc_spec, series, split(series, 280), small_mcmc, config, SEED)

    assert refits == [(1, 280), (11, 290)]


def test_first_forecast_matches_direct_fit(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    config = RollingConfig(refit_interval=10)

    records = run_rolling(res_oc_spec, series, split(series, 280), small_mcmc, config, SEED, init_state)
    chain = sample(
        res_oc_spec,
        series,
        init_state,
        small_mcmc,
        stop=280,
        rng=np.random.default_rng(spawn_seeds(SEED, 2)[0]),
        store_forecast=True,
    )

    q, es = forecast_next(res_oc_spec, series, chain)
    assert (records[0].q, records[0].es) == (q, es)
    assert q == float(np.mean(chain.forecast_q))
    assert es == float(np.mean(chain.forecast_es))


def test_same_seed_same_forecasts(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    config = RollingConfig(refit_interval=10)

    first = run_rolling(res_oc_spec, series, split(series, 290), small_mcmc, config, SEED, init_state)
    second = run_rolling(res_oc_spec, series, split(series, 290), small_mcmc, config, SEED, init_state)

    assert first == second


def test_forecast_beyond_the_series_needs_overnight_return(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    chain = sample(res_oc_spec, series, init_state, small_mcmc)

    q, es = forecast_next(res_oc_spec, series, chain, oc_next=-0.4)

    assert np.isfinite(q) and es <= q
    with pytest.raises(DataValidationError):
        forecast_next(res_oc_spec, series, chain)


def test_split_must_cover_series(res_oc_spec, synthetic_market, small_mcmc):
    series, _ = synthetic_market

    with pytest.raises(DataValidationError):
        run_rolling(res_oc_spec, series, SampleSplit(n=200, m=50, rule="index"), small_mcmc, RollingConfig())


def test_store_resumes_interrupted_run(res_oc_spec, init_state, synthetic_market, small_mcmc, monkeypatch, tmp_path):
    series, _ = synthetic_market
    sample_split = split(series, 270)
    config = RollingConfig(refit_interval=10)
    store = tmp_path / "runs.db"
    expected = run_rolling(res_oc_spec, series, sample_split, small_mcmc, config, SEED, init_state)

    calls = []

    def flaky(*args, **kwargs):
        calls.append(kwargs["stop"])
        if len(calls) == 3:
            raise RuntimeError("interrupted")
        return sample(*args, **kwargs)

    monkeypatch.setattr(rolling, "sample", flaky)
    with pytest.raises(SamplerError):
        run_rolling(res_oc_spec, series, sample_split, small_mcmc, config, SEED, init_state, store_path=store)

    monkeypatch.setattr(rolling, "sample", sample)
    resumed = run_rolling(res_oc_spec, series, sample_split, small_mcmc, config, SEED, init_state, store_path=store)

    assert calls == [270, 280, 290]
    assert resumed == expected


def test_complete_run_is_served_from_store(res_oc_spec, init_state, synthetic_market, small_mcmc, tmp_path, refits):
    series, _ = synthetic_market
    sample_split = split(series, 290)
    config = RollingConfig(refit_interval=5)
    store = tmp_path / "runs.db"

    first = run_rolling(res_oc_spec, series, sample_split, small_mcmc, config, SEED, init_state, store_path=store)
    refits.clear()
    second = run_rolling(res_oc_spec, series, sample_split, small_mcmc, config, SEED, init_state, store_path=store)

    assert refits == []
    assert second == first


def test_forecast_csv_is_exact(res_oc_spec, init_state, synthetic_market, small_mcmc, tmp_path):
    series, _ = synthetic_market
    records = run_rolling(res_oc_spec, series, split(series, 295), small_mcmc, RollingConfig(refit_interval=5), SEED, init_state)

    frame = read_forecasts(write_forecasts(records, tmp_path / "out" / "forecast.csv"))

    assert list(frame.columns) == FORECAST_COLUMNS
    assert frame["q"].tolist() == [rec.q for rec in records]
    assert frame["es"].tolist() == [rec.es for rec in records]
    assert str(frame["date"].iloc[0]) == str(series.dates[295])


def test_read_forecasts_validation(tmp_path):
    missing = tmp_path / "missing.csv"
    pd.DataFrame({"date": ["2020-01-02"], "r": [0.1], "q": [-1.0]}).to_csv(missing, index=False)
    inverted = tmp_path / "inverted.csv"
    pd.DataFrame(
        {"date": ["2020-01-02"], "r": [0.1], "q": [-1.0], "es": [-0.5], "variant": ["RES_CAVIAR"], "alpha": [0.01]}
    ).to_csv(inverted, index=False)

    with pytest.raises(DataValidationError):
        read_forecasts(missing)
    with pytest.raises(BacktestError):
        read_forecasts(inverted)
    with pytest.raises(DataValidationError):
        read_forecasts(tmp_path / "absent.csv")


def test_single_fit_matches_hand_rolled_propagation(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    records = run_rolling(res_oc_spec, series, split(series, 295), small_mcmc, RollingConfig(refit_interval=5), SEED, init_state)
    chain = sample(res_oc_spec, series, init_state, small_mcmc, stop=295, rng=np.random.default_rng(spawn_seeds(SEED, 1)[0]))

    q, w = chain.q_state, chain.w_state
    for i, t in enumerate(range(295, 300)):
        q, w = advance_states(res_oc_spec, chain.betas, chain.gammas, series, q, w, t, t + 1)
        assert records[i].q == float(np.mean(q))
        assert records[i].es == float(np.mean(q - w))


def test_forecast_is_linear_in_a_single_draw(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    state = DrawState.from_chain(sample(res_oc_spec, series, init_state, small_mcmc, stop=250))
    draws = state.betas.shape[0]
    base_q, base_es = forecast_next(res_oc_spec, series, state)

    for delta in (1e-1, 1e-3, 1e-6):
        betas = state.betas.copy()
        betas[7, 0] += delta
        moved = DrawState(betas=betas, gammas=state.gammas, q=state.q, w=state.w, index=state.index)
        image, _ = advance_states(res_oc_spec, betas[7:8], state.gammas[7:8], series, state.q[7:8], state.w[7:8], 250, 251)
        original, _ = advance_states(
            res_oc_spec, state.betas[7:8], state.gammas[7:8], series, state.q[7:8], state.w[7:8], 250, 251
        )

        q, es = forecast_next(res_oc_spec, series, moved)

        expected = (image[0] - original[0]) / draws
        assert q - base_q == pytest.approx(expected, rel=1e-6, abs=1e-12)
        assert es - base_es == pytest.approx(expected, rel=1e-6, abs=1e-12)


def test_nowcast_is_continuous_in_the_overnight_return(res_oc_spec, init_state, synthetic_market, small_mcmc):
    series, _ = synthetic_market
    state = DrawState.from_chain(sample(res_oc_spec, series, init_state, small_mcmc))
    # per-draw slope of Q in oc is beta4 or beta5
    slope = np.maximum(np.abs(state.betas[:, 3]), np.abs(state.betas[:, 4])).mean()
    base_q, base_es = forecast_next(res_oc_spec, series, state, oc_next=-0.3)

    for eps in (1e-1, 1e-3, 1e-6):
        q, es = forecast_next(res_oc_spec, series, state, oc_next=-0.3 + eps)
        assert abs(q - base_q) <= slope * eps + 1e-12
        assert es - base_es == pytest.approx(q - base_q, abs=1e-12)
