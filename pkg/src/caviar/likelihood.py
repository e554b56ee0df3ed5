"""
Asymmetric-Laplace likelihood, flat constraint prior and log-posterior.

Each observation contributes

    log((alpha - 1) / ES_t) + (r_t - Q_t)(alpha - I(r_t <= Q_t)) / (alpha ES_t)

which is finite only while ES_t < 0. The returns are assumed to have zero
conditional mean; that assumption shapes the score but is not checked on data.
"""
from typing import Optional

import numpy as np

from src.caviar.recursion import evaluate_path, covariate_matrix
from src.caviar.specs import InitialState, ModelSpec, ParamVector, check_dimensions, satisfies_constraints
from src.market.series import MarketSeries
from src.utils.errors import DataValidationError, NonFiniteRecursionError


def al_log_terms(r: np.ndarray, q: np.ndarray, es: np.ndarray, alpha: float) -> np.ndarray:
    """Per-observation AL log-density; callers guarantee es < 0"""
    r, q, es = (np.asarray(a, dtype=float) for a in (r, q, es))
    hit = (r <= q).astype(float)
    return np.log((alpha - 1.0) / es) + (r - q) * (alpha - hit) / (alpha * es)


class ALPosterior:
    """
    Log-posterior of one variant over a fixed data window.

    Covariates are built once so repeated evaluations (one per Metropolis
    proposal) only run the recursion kernel and the vectorized density.
    """

    def __init__(
        self,
        spec: ModelSpec,
        series: MarketSeries,
        init: InitialState,
        start: int = 1,
        stop: Optional[int] = None,
    ):
        self.spec = spec
        self.series = series
        self.init = init
        self.start = start
        self.stop = len(series) if stop is None else stop
        if not 1 <= self.start < self.stop <= len(series):
            raise DataValidationError(
                f"Likelihood window [{self.start}, {self.stop}) must satisfy 1 <= start < stop <= {len(series)}"
            )
        self._x = covariate_matrix(spec, series, self.start, self.stop)
        self._r = series.r[self.start : self.stop]

    def log_likelihood(self, params: ParamVector) -> float:
        check_dimensions(self.spec, params)
        q, w = evaluate_path(self.spec, params, self.series, self.init, self.start, self.stop, x=self._x)
        es = q - w
        if np.any(es >= 0.0):
            return -np.inf
        total = float(np.sum(al_log_terms(self._r, q, es, self.spec.alpha)))
        if not np.isfinite(total):
            raise NonFiniteRecursionError(self.start, f"Non-finite AL log-likelihood for {params}")
        return total

    def log_prior(self, params: ParamVector) -> float:
        return log_prior(self.spec, params)

    def __call__(self, params: ParamVector) -> float:
        prior = self.log_prior(params)
        if prior == -np.inf:
            return prior
        return prior + self.log_likelihood(params)


def al_loglik(
    spec: ModelSpec,
    params: ParamVector,
    series: MarketSeries,
    init: InitialState,
    start: int = 1,
    stop: Optional[int] = None,
) -> float:
    """Sum of AL log-densities over [start, stop); -inf when some ES_t >= 0"""
    return ALPosterior(spec, series, init, start, stop).log_likelihood(params)


def log_prior(spec: ModelSpec, params: ParamVector) -> float:
    """Flat indicator prior over the variant's constraint set"""
    return 0.0 if satisfies_constraints(spec, params) else -np.inf


def log_posterior(
    spec: ModelSpec,
    params: ParamVector,
    series: MarketSeries,
    init: InitialState,
    start: int = 1,
    stop: Optional[int] = None,
) -> float:
    return ALPosterior(spec, series, init, start, stop)(params)
