import pandas as pd
import pytest

from main import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from src.caviar.specs import ModelSpec, Variant
from src.market.series import ingest_csv, split
from src.pipeline.rolling import run_rolling, write_forecasts
from src.schemas import McmcConfig, RollingConfig
from src.utils.helpers import spawn_seeds

TRUE_RES_OC = "-0.3,0.7,-0.4,-0.05,-0.2,0.1,0.2,0.5"
SMALL_MCMC = ["--iters", "200", "--burn-in", "100", "--thin", "2"]


@pytest.fixture
def market_file(tmp_path):
    code = main(
        [
            "simulate",
            "--model", "RES_CAVIAR_OC",
            "--alpha", "0.025",
            f"--params={TRUE_RES_OC}",
            "--length", "300",
            "--seed", "3",
            "--out", str(tmp_path / "sim"),
        ]
    )
    assert code == EXIT_OK
    return tmp_path / "sim" / "synthetic.csv"


def _forecast_csv(path, rng, m=300):
    dates = pd.bdate_range("2022-01-03", periods=m).strftime("%Y-%m-%d")
    r = rng.standard_normal(m)
    frames = []
    for variant, level in (("RES_CAVIAR", -1.7), ("RES_CAVIAR_OC", -1.6), ("ES_CAVIAR", -1.2)):
        q = level + 0.2 * rng.standard_normal(m)
        frames.append(pd.DataFrame({"date": dates, "r": r, "q": q, "es": q - 0.5, "variant": variant, "alpha": 0.05}))
    pd.concat(frames).to_csv(path, index=False)
    return path


def test_no_command_is_a_usage_error():
    assert main([]) == EXIT_USAGE


def test_unknown_model_is_rejected_by_the_parser(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--model", "GARCH", "--params", "1", "--out", str(tmp_path)])

    assert info.value.code == EXIT_USAGE


def test_simulate_outputs(market_file):
    true_path = pd.read_csv(market_file.parent / "true_path.csv")

    assert len(ingest_csv(market_file)) == 300
    assert list(true_path.columns) == ["date", "r", "q", "es", "violation"]
    assert len(true_path) == 299


def test_simulate_parameter_count(tmp_path):
    code = main(["simulate", "--model", "RES_CAVIAR", "--params=-0.3,0.7", "--out", str(tmp_path)])

    assert code == EXIT_USAGE


def test_summarize(fixtures_dir, tmp_path):
    code = main(["summarize", str(fixtures_dir / "market_a.csv"), "--split", "5", "--out", str(tmp_path)])

    table = pd.read_csv(tmp_path / "summary.csv")
    assert code == EXIT_OK
    assert len(table) == 6


def test_missing_config_file(fixtures_dir, tmp_path):
    code = main(["summarize", str(fixtures_dir / "market_a.csv"), "--config", str(tmp_path / "none.yaml")])

    assert code == EXIT_USAGE


def test_unknown_config_section(fixtures_dir, tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text("sampler:\n  total_iters: 10\n")

    code = main(["summarize", str(fixtures_dir / "market_a.csv"), "--config", str(config), "--out", str(tmp_path)])

    assert code == EXIT_USAGE


def test_invalid_mcmc_settings(market_file, tmp_path):
    code = main(
        ["fit", str(market_file), "--model", "RES_CAVIAR", "--split", "200", "--iters", "50", "--burn-in", "80", "--out", str(tmp_path)]
    )

    assert code == EXIT_USAGE


def test_fit_writes_summary_and_diagnostics(market_file, tmp_path):
    out = tmp_path / "fit"
    code = main(
        ["fit", str(market_file), "--model", "RES_CAVIAR_OC", "--alpha", "0.025", "--split", "200", "--seed", "9", "--out", str(out)]
        + SMALL_MCMC
    )

    unit = out / "RES_CAVIAR_OC_0.025"
    posterior = pd.read_csv(unit / "posterior.csv", index_col="Parameter")
    assert code == EXIT_OK
    assert len(posterior) == 8
    assert (unit / "trace.csv").exists()
    assert (unit / "acf.csv").exists()


def test_forecast_matches_library_call_byte_for_byte(market_file, tmp_path):
    out = tmp_path / "forecast"
    code = main(
        [
            "forecast", str(market_file),
            "--model", "RES_CAVIAR_OC",
            "--alpha", "0.025",
            "--split", "280",
            "--refit-interval", "10",
            "--seed", "17",
            "--out", str(out),
        ]
        + SMALL_MCMC
    )
    assert code == EXIT_OK

    series = ingest_csv(market_file)
    records = run_rolling(
        ModelSpec(Variant.RES_CAVIAR_OC, 0.025),
        series,
        split(series, 280),
        McmcConfig(total_iters=200, burn_in=100, thin=2),
        RollingConfig(refit_interval=10),
        seed=spawn_seeds(17, 1)[0],
    )
    direct = write_forecasts(records, tmp_path / "direct.csv")

    produced = out / "forecast_RES_CAVIAR_OC_0.025.csv"
    assert produced.read_bytes() == direct.read_bytes()


def test_forecast_needs_enough_in_sample_days(market_file, tmp_path):
    code = main(["forecast", str(market_file), "--model", "RES_CAVIAR", "--split", "50", "--out", str(tmp_path)] + SMALL_MCMC)

    assert code == EXIT_FAILURE


def test_backtest_outputs(rng, tmp_path):
    forecasts = _forecast_csv(tmp_path / "forecasts.csv", rng)
    out = tmp_path / "bt"

    code = main(["backtest", str(forecasts), "--grid-points", "41", "--out", str(out)])

    violations = pd.read_csv(out / "violations_0.05.csv", index_col="Model")
    murphy = pd.read_csv(out / "murphy.csv")
    assert code == EXIT_OK
    assert (out / "backtest.json").exists()
    assert list(violations.index) == ["RES-CAViaR", "ES-CAViaR", "RES-CAViaR-oc"]
    assert len(murphy) == 3 * 2 * 41
    improvement = pd.read_csv(out / "improvement.csv")
    assert improvement["base"].tolist() == ["RES-CAViaR"]


def test_backtest_missing_file(tmp_path):
    assert main(["backtest", str(tmp_path / "absent.csv"), "--out", str(tmp_path)]) == EXIT_FAILURE


def test_murphy_dominance_against_reference(rng, tmp_path):
    forecasts = _forecast_csv(tmp_path / "forecasts.csv", rng)
    out = tmp_path / "murphy"

    code = main(
        [
            "murphy", str(forecasts),
            "--reference", "RES_CAVIAR_OC",
            "--replications", "25",
            "--block-length", "5",
            "--grid-points", "31",
            "--seed", "1",
            "--out", str(out),
        ]
    )

    dominance = pd.read_csv(out / "dominance.csv")
    assert code == EXIT_OK
    assert len(dominance) == 4
    assert set(dominance["competitor"]) == {"RES_CAVIAR", "ES_CAVIAR"}
    assert dominance["p_value"].between(0, 1).all()


def test_murphy_reference_must_be_present(rng, tmp_path):
    forecasts = _forecast_csv(tmp_path / "forecasts.csv", rng)

    code = main(["murphy", str(forecasts), "--reference", "ES_CAVIAR_OC", "--out", str(tmp_path)])

    assert code == EXIT_USAGE


def test_rank_command(fixtures_dir, tmp_path):
    code = main(["rank", str(fixtures_dir / "criteria_1pct.csv"), "--alpha", "0.01", "--out", str(tmp_path)])

    table = pd.read_csv(tmp_path / "ranks_0.01.csv")
    assert code == EXIT_OK
    assert table.iloc[-1, 2:].tolist() == [71, 68, 57, 32, 33]


def test_rank_missing_criteria_column_is_usage_error(tmp_path):
    criteria = tmp_path / "criteria.csv"
    criteria.write_text("market,model,VRate (%),Quantile score\nUS,RES_CAVIAR,1.2,40.0\nUS,ES_CAVIAR,1.0,41.0\n")

    code = main(["rank", str(criteria), "--alpha", "0.01", "--out", str(tmp_path)])

    assert code == EXIT_USAGE
    assert not (tmp_path / "ranks_0.01.csv").exists()
