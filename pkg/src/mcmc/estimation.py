"""
Bayesian estimation of a CAViaR variant: (beta, gamma) blocks sampled by
the adaptive Metropolis machinery against the AL log-posterior.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from src.caviar.likelihood import ALPosterior, log_prior
from src.caviar.recursion import advance_states
from src.caviar.specs import (
    InitialState,
    ModelSpec,
    ParamVector,
    default_start,
    project_interior,
)
from src.market.series import MarketSeries
from src.mcmc.sampler import AdaptiveMetropolis, Block
from src.schemas import McmcConfig
from src.utils.errors import NonFiniteRecursionError, SamplerError
from src.utils.logger import get_logger

logger = get_logger(__name__)

LikelihoodHook = Callable[[ParamVector], float]


@dataclass
class Chain:
    spec: ModelSpec
    draws: np.ndarray
    log_posterior: np.ndarray
    retained_iterations: np.ndarray
    acceptance: Dict[str, Dict[str, float]]
    last_epoch_acceptance: Dict[str, float]
    scale_history: Dict[str, List[float]]
    start: int
    stop: int
    init: InitialState
    # per-draw (Q, w) at index stop - 1
    q_state: np.ndarray
    w_state: np.ndarray
    in_sample_mean: float
    warnings: List[str] = field(default_factory=list)
    forecast_q: Optional[np.ndarray] = None
    forecast_es: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.draws.shape[0]

    @property
    def param_names(self) -> List[str]:
        return self.spec.param_names()

    @property
    def betas(self) -> np.ndarray:
        return self.draws[:, : self.spec.k]

    @property
    def gammas(self) -> np.ndarray:
        return self.draws[:, self.spec.k :]

    def params(self, j: int) -> ParamVector:
        return ParamVector.from_array(self.spec, self.draws[j])

    def posterior_mean(self) -> ParamVector:
        return ParamVector.from_array(self.spec, self.draws.mean(axis=0))


def _blocks(spec: ModelSpec) -> List[Block]:
    return [
        Block("beta", np.arange(spec.k)),
        Block("gamma", np.arange(spec.k, spec.dim)),
    ]


def sample(
    spec: ModelSpec,
    series: MarketSeries,
    init: InitialState,
    config: McmcConfig,
    start: int = 1,
    stop: Optional[int] = None,
    initial: Optional[ParamVector] = None,
    rng: Optional[np.random.Generator] = None,
    log_likelihood: Optional[LikelihoodHook] = None,
    store_forecast: bool = False,
) -> Chain:
    """
    Run the two-phase sampler over the window [start, stop).

    Args:
        initial: starting point; defaults to beta = -0.1, gamma = 0.1
        rng: overrides config.rng_seed
        log_likelihood: replaces the AL likelihood (the prior still applies)
        store_forecast: also keep per-draw (Q, ES) for index `stop`

    Returns:
        Chain of retained draws with per-draw terminal recursion states
    """
    stop = len(series) if stop is None else stop
    posterior = ALPosterior(spec, series, init, start, stop)
    rng = rng if rng is not None else np.random.default_rng(config.rng_seed)

    def target(values: np.ndarray) -> float:
        params = ParamVector.from_array(spec, values)
        prior = log_prior(spec, params)
        if prior == -np.inf:
            return prior
        if log_likelihood is not None:
            return prior + float(log_likelihood(params))
        try:
            return prior + posterior.log_likelihood(params)
        except NonFiniteRecursionError as e:
            logger.debug(f"Rejecting proposal with non-finite recursion: {e}")
            return -np.inf

    start_point = project_interior(spec, initial) if initial is not None else default_start(spec)
    if target(start_point.to_array()) == -np.inf:
        raise SamplerError(f"{spec}: starting point {start_point} has zero posterior density")

    logger.info(
        f"Sampling {spec} on [{start}, {stop}): N={config.total_iters}, M={config.burn_in}, thin={config.thin}"
    )
    result = AdaptiveMetropolis(target, _blocks(spec), config).run(start_point.to_array(), rng)
    if result.draws.shape[0] == 0:
        raise SamplerError(f"{spec}: no retained draws")

    rw = result.acceptance["random_walk"]
    ind = result.acceptance["independent"]
    logger.info(
        f"{spec}: acceptance RW beta={rw['beta']:.3f} gamma={rw['gamma']:.3f}, "
        f"independent beta={ind['beta']:.3f} gamma={ind['gamma']:.3f}, {result.draws.shape[0]} draws kept"
    )

    betas, gammas = result.draws[:, : spec.k], result.draws[:, spec.k :]
    q_state, w_state = advance_states(
        spec,
        betas,
        gammas,
        series,
        np.full(len(betas), init.q0),
        np.full(len(betas), init.w0),
        start,
        stop,
    )

    chain = Chain(
        spec=spec,
        draws=result.draws,
        log_posterior=result.log_target,
        retained_iterations=result.retained_iterations,
        acceptance=result.acceptance,
        last_epoch_acceptance=result.last_epoch_acceptance,
        scale_history=result.scale_history,
        start=start,
        stop=stop,
        init=init,
        q_state=q_state,
        w_state=w_state,
        in_sample_mean=float(np.mean(series.r[start:stop])),
        warnings=list(result.warnings),
    )

    if store_forecast:
        if stop >= len(series):
            raise SamplerError(f"{spec}: no row {stop} to forecast")
        q_next, w_next = advance_states(spec, betas, gammas, series, q_state, w_state, stop, stop + 1)
        chain.forecast_q, chain.forecast_es = q_next, q_next - w_next

    return chain
