"""
Block adaptive Metropolis sampler.

Iterations j < burn_in use Gaussian random-walk proposals per block whose
scale is tuned every `adapt_interval` iterations toward the acceptance band.
From j = burn_in on, each block is proposed independently from a two-component
Gaussian mixture fitted to that block's burn-in draws;
the Metropolis-Hastings ratio then includes the proposal densities.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence

import numpy as np
from scipy.stats import multivariate_normal

from src.schemas import McmcConfig
from src.utils.errors import SamplerError
from src.utils.logger import get_logger

logger = get_logger(__name__)

LogTarget = Callable[[np.ndarray], float]

RW_PHASE = "random_walk"
IND_PHASE = "independent"
DEFAULT_RW_SCALE = 0.05


@dataclass(frozen=True)
class Block:
    name: str
    indices: np.ndarray

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass
class MixtureProposal:
    """(1 - w) N(mean, cov) + w N(mean, inflation * cov)"""

    mean: np.ndarray
    cov: np.ndarray
    heavy_weight: float
    inflation: float

    def __post_init__(self):
        self._chol = np.linalg.cholesky(self.cov)
        self._core = multivariate_normal(mean=self.mean, cov=self.cov)
        self._wide = multivariate_normal(mean=self.mean, cov=self.inflation * self.cov)

    def draw(self, rng: np.random.Generator) -> np.ndarray:
        heavy = rng.random() < self.heavy_weight
        z = rng.standard_normal(len(self.mean))
        spread = np.sqrt(self.inflation) if heavy else 1.0
        return self.mean + spread * (self._chol @ z)

    def logpdf(self, x: np.ndarray) -> float:
        core = np.log1p(-self.heavy_weight) + self._core.logpdf(x)
        if self.heavy_weight == 0.0:
            return float(core)
        wide = np.log(self.heavy_weight) + self._wide.logpdf(x)
        return float(np.logaddexp(core, wide))


@dataclass
class SamplerResult:
    draws: np.ndarray
    log_target: np.ndarray
    retained_iterations: np.ndarray
    acceptance: Dict[str, Dict[str, float]]
    last_epoch_acceptance: Dict[str, float]
    scale_history: Dict[str, List[float]]
    warnings: List[str] = field(default_factory=list)
    proposals: Dict[str, MixtureProposal] = field(default_factory=dict)


class AdaptiveMetropolis:
    """
    Two-phase block Metropolis sampler over a flat parameter vector.

    Usage:
        sampler = AdaptiveMetropolis(log_target, blocks, config)
        result = sampler.run(start, rng)
    """

    def __init__(self, log_target: LogTarget, blocks: Sequence[Block], config: McmcConfig):
        if not blocks:
            raise SamplerError("At least one parameter block is required")
        self.log_target = log_target
        self.blocks = list(blocks)
        self.config = config

    def _initial_scale(self, block: Block) -> float:
        return float(self.config.rw_initial_scale.get(block.name, DEFAULT_RW_SCALE))

    def _fit_proposal(self, history: np.ndarray, block: Block, scale: float) -> MixtureProposal:
        cfg = self.config
        burn_in = history.shape[0]
        keep = max(2, int(np.ceil(burn_in * cfg.proposal_fit_fraction)))
        sample = history[burn_in - keep :, block.indices] if keep <= burn_in else history[:, block.indices]

        mean = sample.mean(axis=0)
        if sample.shape[0] >= 2:
            cov = np.atleast_2d(np.cov(sample, rowvar=False))
        else:
            cov = np.eye(block.size) * scale**2
        cov = cov + cfg.covariance_jitter * np.eye(block.size)
        return MixtureProposal(
            mean=mean, cov=cov, heavy_weight=cfg.heavy_tail_mix_weight, inflation=cfg.heavy_tail_inflation
        )

    def run(self, start: np.ndarray, rng: np.random.Generator) -> SamplerResult:
        cfg = self.config
        x = np.array(start, dtype=float)
        current = float(self.log_target(x))
        if current == -np.inf or np.isnan(current):
            raise SamplerError(f"Initial point {x.tolist()} has zero posterior density")

        n_total, burn_in, thin = cfg.total_iters, cfg.burn_in, cfg.thin
        retained_iters = np.arange(burn_in, n_total, thin)
        draws = np.empty((len(retained_iters), len(x)))
        targets = np.empty(len(retained_iters))
        history = np.empty((burn_in, len(x)))

        scales = {b.name: self._initial_scale(b) for b in self.blocks}
        scale_history = {b.name: [scales[b.name]] for b in self.blocks}
        accepted = {phase: {b.name: 0 for b in self.blocks} for phase in (RW_PHASE, IND_PHASE)}
        epoch_accepted = {b.name: 0 for b in self.blocks}
        last_epoch = {b.name: float("nan") for b in self.blocks}
        warnings: List[str] = []
        proposals: Dict[str, MixtureProposal] = {}
        kept = 0

        for j in range(n_total):
            if j == burn_in:
                proposals = {b.name: self._fit_proposal(history, b, scales[b.name]) for b in self.blocks}
                logger.debug(f"Switching to independent proposals after {burn_in} iterations")

            for block in self.blocks:
                proposal = x.copy()
                if j < burn_in:
                    proposal[block.indices] += scales[block.name] * rng.standard_normal(block.size)
                    candidate = float(self.log_target(proposal))
                    log_ratio = candidate - current
                else:
                    mixture = proposals[block.name]
                    proposal[block.indices] = mixture.draw(rng)
                    candidate = float(self.log_target(proposal))
                    log_ratio = (
                        candidate
                        - current
                        + mixture.logpdf(x[block.indices])
                        - mixture.logpdf(proposal[block.indices])
                    )

                if candidate > -np.inf and np.log(rng.random()) < log_ratio:
                    x, current = proposal, candidate
                    if j < burn_in:
                        accepted[RW_PHASE][block.name] += 1
                        epoch_accepted[block.name] += 1
                    else:
                        accepted[IND_PHASE][block.name] += 1

            if j < burn_in:
                history[j] = x
                if (j + 1) % cfg.adapt_interval == 0:
                    self._adapt(j, scales, epoch_accepted, last_epoch, scale_history, warnings)
            elif kept < len(retained_iters) and j == retained_iters[kept]:
                draws[kept] = x
                targets[kept] = current
                kept += 1

        # last partial epoch still counts for the reported acceptance
        partial = burn_in % cfg.adapt_interval
        if partial:
            for name, count in epoch_accepted.items():
                last_epoch[name] = count / partial

        acceptance = {
            RW_PHASE: {name: count / burn_in for name, count in accepted[RW_PHASE].items()},
            IND_PHASE: {name: count / (n_total - burn_in) for name, count in accepted[IND_PHASE].items()},
        }
        return SamplerResult(
            draws=draws,
            log_target=targets,
            retained_iterations=retained_iters,
            acceptance=acceptance,
            last_epoch_acceptance=last_epoch,
            scale_history=scale_history,
            warnings=warnings,
            proposals=proposals,
        )

    def _adapt(self, j, scales, epoch_accepted, last_epoch, scale_history, warnings) -> None:
        cfg = self.config
        for name, count in epoch_accepted.items():
            rate = count / cfg.adapt_interval
            last_epoch[name] = rate
            if count == 0:
                scales[name] *= cfg.stall_shrink
                message = f"Block '{name}' accepted no proposals in epoch ending at iteration {j + 1}; scale shrunk to {scales[name]:.3g}"
                warnings.append(message)
                logger.warning(message)
            elif rate > cfg.target_accept_high:
                scales[name] *= cfg.adapt_up
            elif rate < cfg.target_accept_low:
                scales[name] *= cfg.adapt_down
            scale_history[name].append(scales[name])
            epoch_accepted[name] = 0
        logger.debug(f"Iteration {j + 1}: epoch acceptance {last_epoch}, scales {scales}")
