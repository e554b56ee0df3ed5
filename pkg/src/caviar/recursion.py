"""
VaR / ES-gap recursions.

Index convention: for a window [start, stop) of the series, step t computes

    Q_t = quantile equation(Q_{t-1}, r_{t-1}, RV_{t-1}, OC_t)
    w_t = gap(Q_{t-1}, r_{t-1}, w_{t-1})
    ES_t = Q_t - w_t

starting from (Q_{start-1}, w_{start-1}) = (q0, w0). Lagged covariates come
from the series itself, so start must be at least 1.
"""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from numba import njit

from src.caviar.specs import (
    InitialState,
    ModelSpec,
    ParamVector,
    check_dimensions,
)
from src.market.series import MarketSeries
from src.utils.errors import DataValidationError, ModelSpecError, NonFiniteRecursionError
from src.utils.helpers import type7_quantile

ES_FALLBACK_FACTOR = 1.2


@dataclass(frozen=True, eq=False)
class RiskPath:
    q: np.ndarray
    w: np.ndarray
    es: np.ndarray
    start: int
    stop: int

    def __len__(self) -> int:
        return len(self.q)


def _pos(x):
    return np.where(x > 0, np.abs(x), 0.0)


def _neg(x):
    return np.where(x <= 0, np.abs(x), 0.0)


def _covariate(name: str, r_prev, rv_prev, oc_curr):
    if name == "pos_r_prev":
        return _pos(r_prev)
    if name == "neg_r_prev":
        return _neg(r_prev)
    if name == "rv_prev":
        return np.asarray(rv_prev, dtype=float)
    if name == "pos_oc":
        return _pos(oc_curr)
    if name == "neg_oc":
        return _neg(oc_curr)
    raise ModelSpecError(f"Unknown covariate {name}")


def covariate_matrix(spec: ModelSpec, series: MarketSeries, start: int, stop: int) -> np.ndarray:
    """Rows t in [start, stop); columns in the variant's summation order"""
    r_prev = series.r[start - 1 : stop - 1]
    rv_prev = series.rv[start - 1 : stop - 1]
    oc_curr = series.oc[start:stop]
    columns = [_covariate(name, r_prev, rv_prev, oc_curr) for _, name in spec.layout.covariates]
    return np.ascontiguousarray(np.column_stack(columns), dtype=float)


def split_beta(spec: ModelSpec, beta: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(intercept, AR coefficient, covariate coefficients) for one draw or a draw matrix"""
    beta = np.asarray(beta, dtype=float)
    cov_idx = [i for i, _ in spec.layout.covariates]
    intercept = beta[..., 0]
    ar = beta[..., spec.layout.ar_index]
    coefs = np.ascontiguousarray(beta[..., cov_idx])
    return intercept, ar, coefs


@njit(cache=True, nogil=True)
def _path_kernel(intercept, ar, coefs, x, r_prev, q0, w0, g1, g2, g3, q_out, w_out):
    q_prev = q0
    w_prev = w0
    for i in range(x.shape[0]):
        q = intercept + ar * q_prev
        for j in range(coefs.shape[0]):
            q += coefs[j] * x[i, j]
        rp = r_prev[i]
        if rp <= q_prev:
            w = g1 + g2 * (q_prev - rp) + g3 * w_prev
        else:
            w = w_prev
        if not (np.isfinite(q) and np.isfinite(w)):
            return i
        q_out[i] = q
        w_out[i] = w
        q_prev = q
        w_prev = w
    return -1


@njit(cache=True, nogil=True)
def _advance_kernel(intercept, ar, coefs, gamma, x, r_prev, q_state, w_state):
    # one independent recursion per draw; states are updated in place
    n_draws = intercept.shape[0]
    for d in range(n_draws):
        q_prev = q_state[d]
        w_prev = w_state[d]
        for i in range(x.shape[0]):
            q = intercept[d] + ar[d] * q_prev
            for j in range(coefs.shape[1]):
                q += coefs[d, j] * x[i, j]
            rp = r_prev[i]
            if rp <= q_prev:
                w = gamma[d, 0] + gamma[d, 1] * (q_prev - rp) + gamma[d, 2] * w_prev
            else:
                w = w_prev
            if not (np.isfinite(q) and np.isfinite(w)):
                return i
            q_prev = q
            w_prev = w
        q_state[d] = q_prev
        w_state[d] = w_prev
    return -1


def quantile_step(
    spec: ModelSpec,
    params: ParamVector,
    q_prev: float,
    r_prev: float,
    rv_prev: float,
    oc_curr: Optional[float],
) -> float:
    """One step of the variant's quantile equation; unused covariates are ignored"""
    check_dimensions(spec, params)
    if spec.uses_oc and oc_curr is None:
        raise DataValidationError(f"{spec.variant.value} needs the current overnight return")
    oc_value = 0.0 if oc_curr is None else oc_curr

    intercept, ar, coefs = split_beta(spec, params.beta)
    q = float(intercept) + float(ar) * q_prev
    for coef, (_, name) in zip(coefs, spec.layout.covariates):
        q += float(coef) * float(_covariate(name, r_prev, rv_prev, oc_value))
    return q


def gap_step(params: ParamVector, q_prev: float, r_prev: float, w_prev: float) -> float:
    """ES gap update; a violation (r_prev <= q_prev) refreshes it, otherwise it carries over"""
    if w_prev < 0:
        raise ModelSpecError(f"Previous gap must be non-negative, got {w_prev}")
    if r_prev <= q_prev:
        g1, g2, g3 = (float(g) for g in params.gamma)
        return g1 + g2 * (q_prev - r_prev) + g3 * w_prev
    return w_prev


def _check_window(series: MarketSeries, start: int, stop: int) -> None:
    if not 1 <= start < stop <= len(series):
        raise DataValidationError(
            f"Recursion window [{start}, {stop}) must satisfy 1 <= start < stop <= {len(series)}"
        )


def run_path(
    spec: ModelSpec,
    params: ParamVector,
    series: MarketSeries,
    init: InitialState,
    start: int = 1,
    stop: Optional[int] = None,
) -> RiskPath:
    """
    Evaluate (Q_t, w_t, ES_t) over [start, stop).

    Parameters are used as given, also on the boundary of the support;
    log_prior is where the constraint set is enforced.

    Raises:
        ModelSpecError: parameter layout mismatch
        NonFiniteRecursionError: an intermediate value overflowed
    """
    stop = len(series) if stop is None else stop
    _check_window(series, start, stop)
    check_dimensions(spec, params)

    q, w = evaluate_path(spec, params, series, init, start, stop)
    return RiskPath(q=q, w=w, es=q - w, start=start, stop=stop)


def evaluate_path(
    spec: ModelSpec,
    params: ParamVector,
    series: MarketSeries,
    init: InitialState,
    start: int,
    stop: int,
    x: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Unchecked evaluation for hot paths; `x` may be a precomputed covariate matrix"""
    if x is None:
        x = covariate_matrix(spec, series, start, stop)
    intercept, ar, coefs = split_beta(spec, params.beta)
    g1, g2, g3 = params.gamma
    q = np.empty(stop - start)
    w = np.empty(stop - start)
    failed = _path_kernel(
        float(intercept), float(ar), coefs, x, series.r[start - 1 : stop - 1],
        init.q0, init.w0, float(g1), float(g2), float(g3), q, w,
    )
    if failed >= 0:
        raise NonFiniteRecursionError(start + failed)
    return q, w


def advance_states(
    spec: ModelSpec,
    betas: np.ndarray,
    gammas: np.ndarray,
    series: MarketSeries,
    q_state: np.ndarray,
    w_state: np.ndarray,
    start: int,
    stop: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Push per-draw (Q, w) states through steps [start, stop).

    Args:
        betas: (draws, k) coefficient matrix
        gammas: (draws, 3) gap coefficients
        q_state, w_state: states at index start - 1, one per draw

    Returns:
        New (q, w) state arrays at index stop - 1
    """
    q_state = np.array(q_state, dtype=float)
    w_state = np.array(w_state, dtype=float)
    if stop == start:
        return q_state, w_state
    _check_window(series, start, stop)

    betas = np.atleast_2d(np.asarray(betas, dtype=float))
    gammas = np.ascontiguousarray(np.atleast_2d(np.asarray(gammas, dtype=float)))
    if betas.shape[1] != spec.k:
        raise ModelSpecError(f"{spec.variant.value} expects {spec.k} beta columns, got {betas.shape[1]}")

    intercept, ar, coefs = split_beta(spec, betas)
    x = covariate_matrix(spec, series, start, stop)
    failed = _advance_kernel(
        np.ascontiguousarray(intercept), np.ascontiguousarray(ar), coefs, gammas,
        x, series.r[start - 1 : stop - 1], q_state, w_state,
    )
    if failed >= 0:
        raise NonFiniteRecursionError(start + failed)
    return q_state, w_state


def default_initial_state(series: MarketSeries, stop: int, alpha: float, start: int = 0) -> InitialState:
    """
    q0 = empirical alpha-quantile of r over [start, stop); es0 = mean of the
    returns at or below q0, or 1.2 * q0 when none are.
    """
    returns = series.r[start:stop]
    if returns.size == 0:
        raise DataValidationError("Cannot derive initial VaR/ES from an empty window")
    q0 = type7_quantile(returns, alpha)
    if q0 >= 0:
        raise DataValidationError(f"Empirical {alpha:g}-quantile {q0:.4f} is not negative; pass q0/es0 explicitly")
    tail = returns[returns <= q0]
    es0 = float(tail.mean()) if tail.size else ES_FALLBACK_FACTOR * q0
    return InitialState(q0=q0, es0=min(es0, q0))


def violation_path(series: MarketSeries, path: RiskPath) -> pd.DataFrame:
    """Plot-ready rows for violation charts"""
    r = series.r[path.start : path.stop]
    return pd.DataFrame(
        {
            "date": pd.to_datetime(series.dates[path.start : path.stop]).strftime("%Y-%m-%d"),
            "r": r,
            "q": path.q,
            "es": path.es,
            "violation": (r < path.q).astype(int),
        }
    )
