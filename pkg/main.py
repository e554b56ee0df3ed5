"""
CLI for the VaR/ES nowcasting engine
"""
import argparse
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.backtest.murphy import default_grid, dominance_test, murphy_es, murphy_var, write_curves
from src.backtest.ranking import rank_markets, read_criteria
from src.backtest.report import backtest_bundle, evaluations_from_forecasts, improvement_table, report_to_json, violation_table
from src.caviar.recursion import default_initial_state, violation_path
from src.caviar.specs import ModelSpec, ParamVector, parse_variant
from src.market.series import ColumnMapping, MarketSeries, ingest_csv, split, summary_table, write_csv
from src.market.synthetic import simulate_market
from src.mcmc.diagnostics import export_diagnostics, summarize_chain
from src.mcmc.estimation import sample
from src.pipeline.rolling import read_forecasts, run_rolling, write_forecasts
from src.schemas import BootstrapConfig, McmcConfig, RollingConfig
from src.utils.config import (
    DEFAULT_ALPHAS,
    DQ_LAGS,
    MAX_WORKERS,
    MURPHY_GRID_POINTS,
    OUTPUT_DIR,
    load_run_config,
    merge_overrides,
)
from src.utils.errors import ModelSpecError, UsageError
from src.utils.helpers import ensure_dir, spawn_seeds
from src.utils.logger import get_logger, set_console_level

logger = get_logger(__name__)

MIN_IN_SAMPLE = 100
EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _variant_arg(value: str):
    try:
        return parse_variant(value)
    except ModelSpecError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _boundary(value):
    """Integer in-sample length or a date"""
    if value is None:
        return None
    text = str(value)
    return int(text) if text.isdigit() else text


def _unit_dir(out: Path, spec: ModelSpec) -> Path:
    return ensure_dir(out / f"{spec.variant.value}_{spec.alpha:g}")


def _load_series(args, data: Dict) -> MarketSeries:
    columns = data.get("columns") or {}
    return ingest_csv(args.input, ColumnMapping(**columns))


def _split(series: MarketSeries, args, data: Dict, min_in_sample: int = 1):
    boundary = _boundary(args.split if args.split is not None else data.get("split"))
    if boundary is None:
        raise UsageError("No split boundary: pass --split or set data.split in the config")
    return split(series, boundary, min_in_sample=min_in_sample)


def _mcmc_config(args, sections: Dict) -> McmcConfig:
    section = merge_overrides(
        sections["mcmc"],
        total_iters=getattr(args, "iters", None),
        burn_in=getattr(args, "burn_in", None),
        thin=getattr(args, "thin", None),
    )
    return McmcConfig(**section)


def _units(args) -> List[ModelSpec]:
    alphas = args.alpha or list(DEFAULT_ALPHAS)
    return [ModelSpec(variant, alpha) for variant in args.model for alpha in alphas]


def _run_units(worker: Callable, payloads: List[Dict]) -> List:
    """Run independent units, in worker processes when there are several"""
    if len(payloads) == 1 or MAX_WORKERS <= 1:
        return [worker(payload) for payload in payloads]

    results = []
    with ProcessPoolExecutor(max_workers=MAX_WORKERS) as executor:
        futures = {executor.submit(worker, payload): payload["spec"] for payload in payloads}
        for done, future in enumerate(as_completed(futures), start=1):
            results.append(future.result())
            logger.info(f"{futures[future]} finished ({done}/{len(futures)})")
    return results


def summarize_command(args, sections):
    """Descriptive statistics per sample period"""
    series = _load_series(args, sections["data"])
    boundary = args.split if args.split is not None else sections["data"].get("split")
    sample_split = split(series, _boundary(boundary)) if boundary is not None else None
    table = summary_table(series, sample_split)

    out = ensure_dir(args.out)
    path = out / "summary.csv"
    table.to_csv(path, index=False, float_format="%.6f")
    print(table.to_string(index=False))
    logger.info(f"Summary written to {path}")


def _fit_unit(payload: Dict) -> Dict:
    spec, series, n = payload["spec"], payload["series"], payload["n"]
    init = default_initial_state(series, stop=n, alpha=spec.alpha)
    chain = sample(
        spec,
        series,
        init,
        payload["mcmc"],
        start=1,
        stop=n,
        rng=np.random.default_rng(payload["seed"]),
    )
    out = _unit_dir(payload["out"], spec)
    summary = summarize_chain(chain)
    summary_path = summary.to_csv(out / "posterior.csv")
    export_diagnostics(chain, out)
    for warning in chain.warnings:
        logger.warning(f"{spec}: {warning}")
    return {"spec": str(spec), "summary": str(summary_path), "table": summary.table}


def fit_command(args, sections):
    """In-sample posterior summary and diagnostics per model and alpha"""
    series = _load_series(args, sections["data"])
    sample_split = _split(series, args, sections["data"], MIN_IN_SAMPLE)
    mcmc = _mcmc_config(args, sections)
    units = _units(args)
    seeds = spawn_seeds(args.seed, len(units))
    out = ensure_dir(args.out)

    payloads = [
        {"spec": spec, "series": series, "n": sample_split.n, "mcmc": mcmc, "seed": seed, "out": out}
        for spec, seed in zip(units, seeds)
    ]
    for result in _run_units(_fit_unit, payloads):
        print(f"\n{result['spec']}\n{result['table'].to_string(float_format=lambda v: f'{v:.4f}')}")
        logger.info(f"Posterior summary written to {result['summary']}")


def _forecast_unit(payload: Dict) -> str:
    spec = payload["spec"]
    records = run_rolling(
        spec,
        payload["series"],
        payload["split"],
        payload["mcmc"],
        payload["rolling"],
        seed=payload["seed"],
        store_path=payload["store"],
    )
    path = write_forecasts(records, payload["out"] / f"forecast_{spec.variant.value}_{spec.alpha:g}.csv")
    return str(path)


def forecast_command(args, sections):
    """Rolling one-step-ahead forecasts over the out-of-sample period"""
    series = _load_series(args, sections["data"])
    sample_split = _split(series, args, sections["data"], MIN_IN_SAMPLE)
    mcmc = _mcmc_config(args, sections)
    rolling = RollingConfig(
        **merge_overrides(
            sections["rolling"],
            window_mode=args.window_mode,
            refit_interval=args.refit_interval,
        )
    )
    units = _units(args)
    seeds = spawn_seeds(args.seed, len(units))
    out = ensure_dir(args.out)

    payloads = [
        {
            "spec": spec,
            "series": series,
            "split": sample_split,
            "mcmc": mcmc,
            "rolling": rolling,
            "seed": seed,
            "store": args.store,
            "out": out,
        }
        for spec, seed in zip(units, seeds)
    ]
    for path in _run_units(_forecast_unit, payloads):
        logger.info(f"Forecasts written to {path}")


def _evaluations(paths: Sequence[str], alpha: Optional[float]):
    frames = [read_forecasts(path) for path in paths]
    evaluations = evaluations_from_forecasts(pd.concat(frames, ignore_index=True))
    if alpha is not None:
        evaluations = {key: e for key, e in evaluations.items() if np.isclose(key[1], alpha)}
    if not evaluations:
        raise UsageError("No forecasts left to evaluate")
    return evaluations


def _grid_points(args, sections) -> int:
    if args.grid_points is not None:
        return args.grid_points
    return int(sections["murphy"].get("grid_points", MURPHY_GRID_POINTS))


def _curves(evaluations, points: int):
    curves = []
    for alpha in sorted({alpha for _, alpha in evaluations}):
        group = [e for (_, a), e in evaluations.items() if a == alpha]
        grid = default_grid(group, points)
        for evaluation in group:
            curves.extend([murphy_var(evaluation, grid), murphy_es(evaluation, grid)])
    return curves


def backtest_command(args, sections):
    """Coverage tests, V(alpha), scores and Murphy curves per forecast series"""
    evaluations = _evaluations(args.forecasts, args.alpha)
    bundle = backtest_bundle(evaluations, dq_lags=args.dq_lags)
    out = ensure_dir(args.out)

    report_path = report_to_json(bundle, out / "backtest.json")
    for alpha in sorted({report.alpha for report in bundle.reports}):
        table = violation_table([report for report in bundle.reports if report.alpha == alpha])
        table.to_csv(out / f"violations_{alpha:g}.csv", index_label="Model")
        print(f"\nalpha = {alpha:g}\n{table.to_string()}")

    if bundle.improvement:
        improvement_table({"input": bundle.improvement}).to_csv(out / "improvement.csv", float_format="%.4f")

    points = _grid_points(args, sections)
    write_curves(_curves(evaluations, points), out / "murphy.csv")
    logger.info(f"Backtest report written to {report_path}")


def murphy_command(args, sections):
    """Murphy curves on a shared grid plus dominance tests against a reference model"""
    evaluations = _evaluations(args.forecasts, args.alpha)
    points = _grid_points(args, sections)
    bootstrap = BootstrapConfig(
        **merge_overrides(
            sections["bootstrap"],
            replications=args.replications,
            block_length=args.block_length,
            seed=args.seed,
        )
    )
    out = ensure_dir(args.out)
    write_curves(_curves(evaluations, points), out / "murphy.csv")

    reference = parse_variant(args.reference).value if args.reference else None
    rows = []
    pairs = [(key, e) for key, e in evaluations.items() if reference is not None and key[0] == reference]
    if reference is not None and not pairs:
        raise UsageError(f"Reference model {reference} not found in the forecast files")
    rngs = iter(np.random.default_rng(s) for s in spawn_seeds(bootstrap.seed, 2 * len(evaluations)))
    for (_, alpha), ref in pairs:
        competitors = [e for (variant, a), e in evaluations.items() if a == alpha and variant != reference]
        grid = default_grid([ref] + competitors, points)
        for competitor in competitors:
            for measure in ("VaR", "ES"):
                result = dominance_test(ref, competitor, grid, bootstrap, measure=measure, rng=next(rngs))
                rows.append(
                    {
                        "reference": reference,
                        "competitor": competitor.model,
                        "alpha": alpha,
                        "measure": measure,
                        "statistic": result.statistic,
                        "p_value": result.p_value,
                    }
                )
    if rows:
        pd.DataFrame(rows).to_csv(out / "dominance.csv", index=False, float_format="%.6g")
    logger.info(f"Murphy output written to {out}")


def rank_command(args, sections):
    """Rank tables with per-market sums and a cross-market total"""
    table = rank_markets(read_criteria(args.criteria), args.alpha)
    out = ensure_dir(args.out)
    target = out / f"ranks_{args.alpha:g}.csv"
    table.to_csv(target)
    print(table.to_string())
    logger.info(f"Rank table written to {target}")


def simulate_command(args, sections):
    """Synthetic market with known VaR/ES dynamics"""
    variant = args.model[0]
    spec = ModelSpec(variant, args.alpha[0] if args.alpha else DEFAULT_ALPHAS[0])
    values = [float(v) for v in args.params.split(",")]
    if len(values) != spec.dim:
        raise UsageError(f"{variant.value} takes {spec.dim} parameters ({', '.join(spec.param_names())}), got {len(values)}")
    params = ParamVector.from_array(spec, values)

    series, path = simulate_market(spec, params, args.length, np.random.default_rng(args.seed))
    out = ensure_dir(args.out)
    write_csv(series, out / "synthetic.csv")
    violation_path(series, path).to_csv(out / "true_path.csv", index=False, float_format="%.17g")
    logger.info(f"Simulated {args.length} days of {spec} into {out}")


COMMANDS = {
    "summarize": summarize_command,
    "fit": fit_command,
    "forecast": forecast_command,
    "backtest": backtest_command,
    "murphy": murphy_command,
    "rank": rank_command,
    "simulate": simulate_command,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="YAML run config with mcmc/rolling/bootstrap/data/murphy sections")
    common.add_argument("--seed", type=int, default=None, help="Root seed for every stochastic component")
    common.add_argument("--out", type=Path, default=Path(OUTPUT_DIR), help=f"Output directory (default: {OUTPUT_DIR})")
    common.add_argument("--verbose", action="store_true", help="Debug logging on the console")

    models = argparse.ArgumentParser(add_help=False)
    models.add_argument("--model", type=_variant_arg, action="append", required=True, help="Model variant (repeatable)")
    models.add_argument("--alpha", type=float, action="append", default=None, help="VaR level (repeatable)")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("input", help="Daily market CSV")
    data.add_argument("--split", default=None, help="In-sample length or last in-sample date")

    mcmc = argparse.ArgumentParser(add_help=False)
    mcmc.add_argument("--iters", type=int, default=None, help="Total MCMC iterations N")
    mcmc.add_argument("--burn-in", type=int, default=None, help="Burn-in iterations M")
    mcmc.add_argument("--thin", type=int, default=None, help="Keep every k-th post-burn-in draw")

    scoring = argparse.ArgumentParser(add_help=False)
    scoring.add_argument("forecasts", nargs="+", help="Forecast CSVs (date,r,q,es,variant,alpha)")
    scoring.add_argument("--alpha", type=float, default=None, help="Only evaluate this alpha")
    scoring.add_argument("--grid-points", type=int, default=None, help=f"Murphy grid size (default: {MURPHY_GRID_POINTS})")

    parser = argparse.ArgumentParser(description="Joint VaR/ES nowcasting with overnight returns")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    subparsers.add_parser("summarize", parents=[common, data], help="Summary statistics of r, oc and rv")
    subparsers.add_parser("fit", parents=[common, data, models, mcmc], help="Fit models on the in-sample period")

    forecast_parser = subparsers.add_parser("forecast", parents=[common, data, models, mcmc], help="Rolling out-of-sample forecasts")
    forecast_parser.add_argument("--refit-interval", type=int, default=None, help="Refit every k days (default 1)")
    forecast_parser.add_argument("--window-mode", choices=["expanding", "fixed"], default=None)
    forecast_parser.add_argument("--store", type=Path, default=None, help="SQLite run store for resumable runs")

    backtest_parser = subparsers.add_parser("backtest", parents=[common, scoring], help="Backtest forecast files")
    backtest_parser.add_argument("--dq-lags", type=int, default=DQ_LAGS, help="Hit lags in the DQ regression")

    murphy_parser = subparsers.add_parser("murphy", parents=[common, scoring], help="Murphy curves and dominance tests")
    murphy_parser.add_argument("--reference", default=None, help="Model tested for dominance over the others")
    murphy_parser.add_argument("--replications", type=int, default=None)
    murphy_parser.add_argument("--block-length", type=float, default=None)

    rank_parser = subparsers.add_parser("rank", parents=[common], help="Rank models from a criteria CSV")
    rank_parser.add_argument("criteria", help="CSV with market, model and criteria columns")
    rank_parser.add_argument("--alpha", type=float, required=True)

    simulate_parser = subparsers.add_parser("simulate", parents=[common, models], help="Simulate a synthetic market")
    simulate_parser.add_argument("--params", required=True, help="Comma-separated beta then gamma values")
    simulate_parser.add_argument("--length", type=int, default=2000)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    if args.verbose:
        set_console_level("DEBUG")

    try:
        sections = load_run_config(args.config)
    except (FileNotFoundError, ValueError) as e:
        logger.error(f"Bad config: {e}")
        return EXIT_USAGE

    try:
        COMMANDS[args.command](args, sections)
    except (UsageError, ValidationError) as e:
        logger.error(f"Usage error: {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"Command failed: {e}")
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
