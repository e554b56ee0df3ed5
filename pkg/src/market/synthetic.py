"""
Synthetic markets with known conditional VaR / ES.

Returns are drawn from a two-piece exponential law around the VaR:
mass alpha sits below q with mean es, the rest sits above q with the
upper-branch rate of the asymmetric-Laplace density (scale |es|).
"""
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from src.caviar.recursion import RiskPath, gap_step, quantile_step
from src.caviar.specs import InitialState, ModelSpec, ParamVector, satisfies_constraints
from src.market.series import MarketSeries
from src.utils.errors import ModelSpecError
from src.utils.logger import get_logger

logger = get_logger(__name__)

DEFAULT_START_DATE = "2000-01-03"


@dataclass(frozen=True)
class CovariateConfig:
    """Log-RV is a Gaussian AR(1); overnight returns are iid Gaussian"""

    rv_log_mean: float = float(np.log(0.4))
    rv_persistence: float = 0.9
    rv_innovation_std: float = 0.3
    oc_std: float = 0.8

    def __post_init__(self):
        if not -1.0 < self.rv_persistence < 1.0:
            raise ModelSpecError("rv_persistence must lie in (-1, 1)")
        if self.rv_innovation_std < 0 or self.oc_std < 0:
            raise ModelSpecError("Standard deviations must be non-negative")


def al_sample(
    q: float,
    es: float,
    alpha: float,
    rng: np.random.Generator,
    size: Optional[Union[int, Tuple[int, ...]]] = None,
) -> Union[float, np.ndarray]:
    """
    Inverse-CDF draw with P(r <= q) = alpha and E[r | r <= q] = es.

    Below q the distance q - r is exponential with mean q - es; above q,
    r - q is exponential with mean |es|.
    """
    if not 0.0 < alpha < 1.0:
        raise ModelSpecError(f"alpha must lie in (0, 1), got {alpha}")
    if not es < 0.0:
        raise ModelSpecError(f"ES must be negative, got {es}")
    if es > q:
        raise ModelSpecError(f"ES {es} must not exceed VaR {q}")

    u = rng.random(size)
    lower = u < alpha
    tail_gap = q - es
    # (0, 1] uniforms within each branch
    below = np.maximum(u / alpha, np.finfo(float).tiny)
    above = np.maximum((1.0 - u) / (1.0 - alpha), np.finfo(float).tiny)
    draws = np.where(lower, q + tail_gap * np.log(below), q - abs(es) * np.log(above))
    return float(draws) if np.ndim(draws) == 0 else draws


def al_conditional_mean(q, es, alpha: float):
    """Mean of the al_sample law; generally not zero"""
    return alpha * np.asarray(es) + (1.0 - alpha) * (np.asarray(q) + np.abs(es))


def simulate_market(
    spec: ModelSpec,
    true_params: ParamVector,
    length: int,
    rng: np.random.Generator,
    covariates: Optional[CovariateConfig] = None,
    init: Optional[InitialState] = None,
    start_date: str = DEFAULT_START_DATE,
) -> Tuple[MarketSeries, RiskPath]:
    """
    Simulate `length` business days.

    Row 0 draws its return from the initial (q0, es0); rows 1.. follow the
    true recursion, so the returned path covers [1, length) and matches
    run_path(spec, true_params, series, init) exactly.
    """
    if length < 2:
        raise ModelSpecError(f"Need at least 2 days, got {length}")
    if not satisfies_constraints(spec, true_params):
        raise ModelSpecError(f"True parameters {true_params} violate the {spec.variant.value} constraints")

    covariates = covariates or CovariateConfig()
    init = init or InitialState(q0=-2.0, es0=-2.5)

    stationary_std = covariates.rv_innovation_std / np.sqrt(1.0 - covariates.rv_persistence**2)
    log_rv = np.empty(length)
    log_rv[0] = covariates.rv_log_mean + stationary_std * rng.standard_normal()
    shocks = covariates.rv_innovation_std * rng.standard_normal(length - 1)
    for t in range(1, length):
        log_rv[t] = covariates.rv_log_mean + covariates.rv_persistence * (log_rv[t - 1] - covariates.rv_log_mean) + shocks[t - 1]
    rv = np.exp(log_rv)
    oc = covariates.oc_std * rng.standard_normal(length)

    r = np.empty(length)
    q = np.empty(length - 1)
    w = np.empty(length - 1)
    r[0] = al_sample(init.q0, init.es0, spec.alpha, rng)
    q_prev, w_prev = init.q0, init.w0
    for t in range(1, length):
        q_t = quantile_step(spec, true_params, q_prev, r[t - 1], rv[t - 1], oc[t])
        w_t = gap_step(true_params, q_prev, r[t - 1], w_prev)
        es_t = q_t - w_t
        if es_t >= 0:
            raise ModelSpecError(f"True ES is non-negative at t={t}; choose parameters keeping ES below zero")
        r[t] = al_sample(q_t, es_t, spec.alpha, rng)
        q[t - 1], w[t - 1] = q_t, w_t
        q_prev, w_prev = q_t, w_t

    dates = np.busday_offset(np.datetime64(start_date, "D"), np.arange(length), roll="forward")
    series = MarketSeries(dates=dates, r=r, oc=oc, rv=rv)
    path = RiskPath(q=q, w=w, es=q - w, start=1, stop=length)

    hit_rate = float(np.mean(r[1:] < q))
    implied_mean = float(np.mean(al_conditional_mean(q, path.es, spec.alpha)))
    logger.debug(
        f"Simulated {length} days for {spec}: violation rate {hit_rate:.4f}, "
        f"mean conditional mean {implied_mean:.4f}"
    )
    return series, path
