from pathlib import Path

import numpy as np
import pytest

from src.caviar.specs import InitialState, ModelSpec, ParamVector, Variant
from src.market.synthetic import simulate_market
from src.schemas import McmcConfig

FIXTURES = Path(__file__).parent / "fixtures"

# constraint-satisfying parameters that keep ES below zero for every variant
TRUE_BETAS = {
    Variant.ES_CAVIAR: [-0.2, -0.1, -0.3, 0.8],
    Variant.RES_CAVIAR: [-0.3, 0.7, -0.5],
    Variant.ES_CAVIAR_OC: [-0.4, 0.7, -0.05, -0.3],
    Variant.RES_CAVIAR_OC_MINUS: [-0.3, 0.7, -0.4, -0.2],
    Variant.RES_CAVIAR_OC: [-0.3, 0.7, -0.4, -0.05, -0.2],
}
TRUE_GAMMA = [0.1, 0.2, 0.5]


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def res_oc_spec() -> ModelSpec:
    return ModelSpec(Variant.RES_CAVIAR_OC, 0.025)


@pytest.fixture
def true_params(res_oc_spec) -> ParamVector:
    return ParamVector(beta=TRUE_BETAS[res_oc_spec.variant], gamma=TRUE_GAMMA)


@pytest.fixture
def init_state() -> InitialState:
    return InitialState(q0=-2.0, es0=-2.5)


@pytest.fixture
def synthetic_market(res_oc_spec, true_params):
    """(series, true path) of 300 simulated days"""
    return simulate_market(res_oc_spec, true_params, 300, np.random.default_rng(2024))


@pytest.fixture
def small_mcmc() -> McmcConfig:
    return McmcConfig(total_iters=400, burn_in=200, thin=2, adapt_interval=50, rng_seed=7)
