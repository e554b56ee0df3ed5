"""
Validated configuration and report models.

Configs are merged from YAML sections and CLI flags, then validated here;
reports are what the CLI serializes to JSON.
"""
from datetime import date
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.utils.config import (
    BOOTSTRAP_BLOCK_LENGTH,
    BOOTSTRAP_REPLICATIONS,
    MCMC_BURN_IN,
    MCMC_ITERATIONS,
    MCMC_THIN,
)


class McmcConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    total_iters: int = Field(MCMC_ITERATIONS, ge=2)
    burn_in: int = Field(MCMC_BURN_IN, ge=1)
    thin: int = Field(MCMC_THIN, ge=1)
    target_accept_low: float = 0.25
    target_accept_high: float = 0.50
    rng_seed: Optional[int] = None
    rw_initial_scale: Dict[str, float] = Field(default_factory=lambda: {"beta": 0.05, "gamma": 0.05})
    adapt_interval: int = Field(200, ge=1)
    adapt_up: float = Field(1.1, gt=1.0)
    adapt_down: float = Field(0.9, gt=0.0, lt=1.0)
    stall_shrink: float = Field(0.5, gt=0.0, lt=1.0)
    heavy_tail_mix_weight: float = Field(0.05, ge=0.0, lt=1.0)
    heavy_tail_inflation: float = Field(9.0, ge=1.0)
    covariance_jitter: float = Field(1e-8, gt=0.0)
    # trailing share of the burn-in draws the independent proposal is fitted to
    proposal_fit_fraction: float = Field(1.0, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_phases(self) -> "McmcConfig":
        if not 0 < self.burn_in < self.total_iters:
            raise ValueError("burn_in must satisfy 0 < burn_in < total_iters")
        if not 0 < self.target_accept_low < self.target_accept_high < 1:
            raise ValueError("acceptance band must satisfy 0 < low < high < 1")
        return self

    @field_validator("rw_initial_scale")
    @classmethod
    def _positive_scales(cls, value: Dict[str, float]) -> Dict[str, float]:
        if any(scale <= 0 for scale in value.values()):
            raise ValueError("random-walk scales must be positive")
        return value

    @property
    def retained_count(self) -> int:
        return len(range(self.burn_in, self.total_iters, self.thin))


class RollingConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    window_mode: Literal["expanding", "fixed"] = "expanding"
    refit_interval: int = Field(1, ge=1)
    warm_start: bool = True


class BootstrapConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    replications: int = Field(BOOTSTRAP_REPLICATIONS, ge=1)
    block_length: float = Field(BOOTSTRAP_BLOCK_LENGTH, ge=1.0)
    seed: Optional[int] = None


class HypothesisTest(BaseModel):
    statistic: float
    p_value: float = Field(ge=0.0, le=1.0)
    dof: int
    reject: bool


class BacktestReport(BaseModel):
    """One model at one alpha over one evaluation window"""

    model: str
    alpha: float
    m: int
    start: Optional[date] = None
    end: Optional[date] = None
    violation_count: int
    vrate: float = Field(ge=0.0, le=1.0)
    uc: HypothesisTest
    cc: Optional[HypothesisTest] = None
    dq: Optional[HypothesisTest] = None
    var_rejections: int
    v1: Optional[float] = None
    v2: float
    v_measure: float
    v1_undefined: bool = False
    quantile_score: float
    al_log_score: float
    mean_quantile_score: float
    mean_al_log_score: float
    significance_level: float = 0.05


class BacktestBundle(BaseModel):
    """Everything the backtest command writes to JSON"""

    reports: List[BacktestReport]
    improvement: Optional[List[Dict[str, object]]] = None
