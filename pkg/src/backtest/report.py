"""
Backtest reports and comparison tables built from forecast files
"""
import json
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Tuple, Union

import pandas as pd

from src.backtest.coverage import SIGNIFICANCE_LEVEL, EvalSeries, cc_test, dq_test, safe_test, uc_test, vrate
from src.backtest.scores import al_log_score, quantile_score, score_diff_tstat, v_measure
from src.caviar.specs import LAYOUTS, NOWCAST_PAIRS, TABLE_ORDER, parse_variant
from src.schemas import BacktestBundle, BacktestReport
from src.utils.config import DQ_LAGS
from src.utils.errors import BacktestError, ModelSpecError
from src.utils.logger import get_logger

logger = get_logger(__name__)

AVERAGE_ROW = "Avg loss"
VIOLATION_COLUMNS = ["Count", "Rate (%)", "VaR rejections", "ES evaluation"]


def _to_date(value):
    if value is None:
        return None
    return pd.Timestamp(value).date()


def evaluations_from_forecasts(frame: pd.DataFrame) -> Dict[Tuple[str, float], EvalSeries]:
    """
    Split a forecast table (possibly several variants and alphas) into
    aligned evaluation series keyed by (variant, alpha).
    """
    evaluations = {}
    for (variant, alpha), group in frame.groupby(["variant", "alpha"], sort=False):
        group = group.sort_values("date")
        evaluations[(str(variant), float(alpha))] = EvalSeries.from_frame(group, float(alpha), model=str(variant))
    return evaluations


def backtest(
    evaluation: EvalSeries,
    dq_lags: int = DQ_LAGS,
    level: float = SIGNIFICANCE_LEVEL,
) -> BacktestReport:
    """
    Full evaluation of one forecast series.

    UC is always defined; CC and DQ are left empty (and counted as
    not rejecting) when their statistics cannot be formed.
    """
    count, rate = vrate(evaluation)
    uc = uc_test(count, evaluation.m, evaluation.alpha)
    cc = safe_test(cc_test, evaluation.hits(), evaluation.alpha)
    dq = safe_test(dq_test, evaluation, dq_lags)
    rejections = sum(1 for test in (uc, cc, dq) if test is not None and test.p_value < level)

    v = v_measure(evaluation)
    _, qs_total = quantile_score(evaluation)
    _, al_total = al_log_score(evaluation)

    dates = evaluation.dates
    report = BacktestReport(
        model=evaluation.model,
        alpha=evaluation.alpha,
        m=evaluation.m,
        start=_to_date(dates[0]) if dates is not None else None,
        end=_to_date(dates[-1]) if dates is not None else None,
        violation_count=count,
        vrate=rate,
        uc=uc,
        cc=cc,
        dq=dq,
        var_rejections=rejections,
        v1=v.v1,
        v2=v.v2,
        v_measure=v.value,
        v1_undefined=v.v1_undefined,
        quantile_score=qs_total,
        al_log_score=al_total,
        mean_quantile_score=qs_total / evaluation.m,
        mean_al_log_score=al_total / evaluation.m,
        significance_level=level,
    )
    logger.info(
        f"{evaluation.model or 'forecast'}@{evaluation.alpha}: {count} violations ({100 * rate:.2f}%), "
        f"{rejections} VaR rejections, V={v.value:.4f}, QS={qs_total:.4f}, AL={al_total:.3f}"
    )
    return report


def _label(model: str) -> str:
    try:
        return LAYOUTS[parse_variant(model)].label
    except ModelSpecError:
        return model


def _ordered(models: Iterable[str]) -> List[str]:
    models = list(dict.fromkeys(models))
    known = [v.value for v in TABLE_ORDER if v.value in models]
    return known + [m for m in models if m not in known]


def violation_table(reports: Iterable[BacktestReport]) -> pd.DataFrame:
    """Per-model violation count, rate, VaR rejections and V(alpha)"""
    reports = {report.model: report for report in reports}
    rows = {}
    for model in _ordered(reports):
        report = reports[model]
        rows[_label(model)] = [
            report.violation_count,
            round(100.0 * report.vrate, 2),
            report.var_rejections,
            report.v_measure,
        ]
    return pd.DataFrame.from_dict(rows, orient="index", columns=VIOLATION_COLUMNS)


def score_table(reports_by_market: Mapping[str, Iterable[BacktestReport]], score: str = "quantile") -> pd.DataFrame:
    """
    Summed scores with one row per market and one column per model,
    closed by the cross-market average.
    """
    if score not in ("quantile", "al"):
        raise BacktestError(f"Unknown score '{score}'")
    field = "quantile_score" if score == "quantile" else "al_log_score"

    rows = {}
    models: List[str] = []
    for market, reports in reports_by_market.items():
        values = {report.model: getattr(report, field) for report in reports}
        models.extend(values)
        rows[market] = values
    columns = _ordered(models)

    table = pd.DataFrame.from_dict(rows, orient="index").reindex(columns=columns)
    table.loc[AVERAGE_ROW] = table.mean(axis=0)
    table.columns = [_label(model) for model in columns]
    return table


def nowcasting_improvement(evaluations: Mapping[str, EvalSeries]) -> List[Dict[str, object]]:
    """
    Standardized score differences for each (without, with) overnight
    pair present; positive values favour the overnight model.
    """
    by_variant = {}
    for name, evaluation in evaluations.items():
        try:
            by_variant[parse_variant(name)] = evaluation
        except ModelSpecError:
            logger.debug(f"'{name}' is not a known variant; no overnight pair")
    rows = []
    for base, nowcast in NOWCAST_PAIRS:
        if base not in by_variant or nowcast not in by_variant:
            continue
        without_oc, with_oc = by_variant[base], by_variant[nowcast]
        rows.append(
            {
                "base": LAYOUTS[base].label,
                "with_overnight": LAYOUTS[nowcast].label,
                "alpha": with_oc.alpha,
                "VaR": score_diff_tstat(with_oc, without_oc, "quantile"),
                "ES": score_diff_tstat(with_oc, without_oc, "al"),
            }
        )
    return rows


def improvement_table(rows_by_market: Mapping[str, List[Dict[str, object]]]) -> pd.DataFrame:
    """2 x 2 blocks per market: pairs as rows, VaR and ES t-statistics as columns"""
    frames = []
    for market, rows in rows_by_market.items():
        frame = pd.DataFrame(rows)
        if frame.empty:
            continue
        frame.insert(0, "market", market)
        frames.append(frame)
    if not frames:
        raise BacktestError("No forecast pairs with and without overnight information")
    return pd.concat(frames, ignore_index=True).set_index(["market", "base", "with_overnight"])


def backtest_bundle(
    evaluations: Mapping[Tuple[str, float], EvalSeries],
    dq_lags: int = DQ_LAGS,
) -> BacktestBundle:
    reports = [backtest(evaluation, dq_lags) for evaluation in evaluations.values()]

    improvement: List[Dict[str, object]] = []
    for alpha in sorted({alpha for _, alpha in evaluations}):
        same_alpha = {variant: e for (variant, a), e in evaluations.items() if a == alpha}
        try:
            improvement.extend(nowcasting_improvement(same_alpha))
        except BacktestError as e:
            logger.warning(f"Score differences at alpha={alpha} skipped: {e}")
    return BacktestBundle(reports=reports, improvement=improvement or None)


def report_to_json(bundle: BacktestBundle, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = bundle.model_dump(mode="json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, allow_nan=False)
    return path


def load_report(path: Union[str, Path]) -> BacktestBundle:
    with open(path, encoding="utf-8") as fh:
        return BacktestBundle.model_validate(json.load(fh))
