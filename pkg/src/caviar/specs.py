"""
Model variants, parameter layouts and constraint sets.

Every variant shares the ES gap recursion (gamma1..gamma3) and differs only
in the quantile equation:

    ES_CAVIAR            b1 + b2 I(r>0)|r| + b3 I(r<=0)|r| + b4 Q   (r = r_{t-1})
    RES_CAVIAR           b1 + b2 Q + b3 RV_{t-1}
    ES_CAVIAR_OC         b1 + b2 Q + b3 I(OC>0)|OC| + b4 I(OC<=0)|OC|   (OC = OC_t)
    RES_CAVIAR_OC_MINUS  b1 + b2 Q + b3 RV_{t-1} + b4 I(OC<=0)|OC|
    RES_CAVIAR_OC        b1 + b2 Q + b3 RV_{t-1} + b4 I(OC>0)|OC| + b5 I(OC<=0)|OC|

with Q = Q_{t-1}.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np

from src.utils.errors import ModelSpecError

GAMMA_SIZE = 3
INTERIOR_MARGIN = 1e-3


class Variant(str, Enum):
    ES_CAVIAR = "ES_CAVIAR"
    RES_CAVIAR = "RES_CAVIAR"
    ES_CAVIAR_OC = "ES_CAVIAR_OC"
    RES_CAVIAR_OC_MINUS = "RES_CAVIAR_OC_MINUS"
    RES_CAVIAR_OC = "RES_CAVIAR_OC"


@dataclass(frozen=True)
class VariantLayout:
    k: int
    ar_index: int
    # (beta index, covariate name) in summation order
    covariates: Tuple[Tuple[int, str], ...]
    negative: Tuple[int, ...]
    label: str

    @property
    def uses_oc(self) -> bool:
        return any(name.endswith("_oc") for _, name in self.covariates)


LAYOUTS: Dict[Variant, VariantLayout] = {
    Variant.ES_CAVIAR: VariantLayout(
        k=4, ar_index=3, covariates=((1, "pos_r_prev"), (2, "neg_r_prev")), negative=(), label="ES-CAViaR"
    ),
    Variant.RES_CAVIAR: VariantLayout(
        k=3, ar_index=1, covariates=((2, "rv_prev"),), negative=(2,), label="RES-CAViaR"
    ),
    Variant.ES_CAVIAR_OC: VariantLayout(
        k=4, ar_index=1, covariates=((2, "pos_oc"), (3, "neg_oc")), negative=(3,), label="ES-CAViaR-oc"
    ),
    Variant.RES_CAVIAR_OC_MINUS: VariantLayout(
        k=4, ar_index=1, covariates=((2, "rv_prev"), (3, "neg_oc")), negative=(2, 3), label="RES-CAViaR-oc-"
    ),
    Variant.RES_CAVIAR_OC: VariantLayout(
        k=5,
        ar_index=1,
        covariates=((2, "rv_prev"), (3, "pos_oc"), (4, "neg_oc")),
        negative=(2, 4),
        label="RES-CAViaR-oc",
    ),
}

# column order used by every comparison table
TABLE_ORDER: List[Variant] = [
    Variant.RES_CAVIAR,
    Variant.ES_CAVIAR,
    Variant.ES_CAVIAR_OC,
    Variant.RES_CAVIAR_OC_MINUS,
    Variant.RES_CAVIAR_OC,
]

# (without overnight information, with it)
NOWCAST_PAIRS: List[Tuple[Variant, Variant]] = [
    (Variant.ES_CAVIAR, Variant.ES_CAVIAR_OC),
    (Variant.RES_CAVIAR, Variant.RES_CAVIAR_OC),
]


def parse_variant(value: Union[str, Variant]) -> Variant:
    if isinstance(value, Variant):
        return value
    key = str(value).strip().upper().replace("-", "_")
    try:
        return Variant(key)
    except ValueError:
        raise ModelSpecError(
            f"Unknown model '{value}', expected one of {[v.value for v in Variant]}"
        ) from None


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant
    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "variant", parse_variant(self.variant))
        alpha = float(self.alpha)
        if not 0.0 < alpha < 0.5:
            raise ModelSpecError(f"alpha must lie in (0, 0.5), got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def layout(self) -> VariantLayout:
        return LAYOUTS[self.variant]

    @property
    def k(self) -> int:
        return self.layout.k

    @property
    def dim(self) -> int:
        return self.k + GAMMA_SIZE

    @property
    def uses_oc(self) -> bool:
        return self.layout.uses_oc

    def param_names(self) -> List[str]:
        return [f"beta{i + 1}" for i in range(self.k)] + [f"gamma{i + 1}" for i in range(GAMMA_SIZE)]

    def __str__(self) -> str:
        return f"{self.variant.value}@{self.alpha:g}"


@dataclass(frozen=True, eq=False)
class ParamVector:
    beta: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).ravel()
        gamma = np.array(self.gamma, dtype=float).ravel()
        if gamma.size != GAMMA_SIZE:
            raise ModelSpecError(f"gamma must have {GAMMA_SIZE} entries, got {gamma.size}")
        beta.setflags(write=False)
        gamma.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "gamma", gamma)

    @classmethod
    def from_array(cls, spec: ModelSpec, values: Sequence[float]) -> "ParamVector":
        values = np.asarray(values, dtype=float).ravel()
        if values.size != spec.dim:
            raise ModelSpecError(f"{spec.variant.value} expects {spec.dim} parameters, got {values.size}")
        return cls(beta=values[: spec.k], gamma=values[spec.k :])

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.beta, self.gamma])

    def __eq__(self, other) -> bool:
        if not isinstance(other, ParamVector):
            return NotImplemented
        return np.array_equal(self.beta, other.beta) and np.array_equal(self.gamma, other.gamma)

    def __repr__(self) -> str:
        return f"ParamVector(beta={self.beta.tolist()}, gamma={self.gamma.tolist()})"


def check_dimensions(spec: ModelSpec, params: ParamVector) -> None:
    if params.beta.size != spec.k:
        raise ModelSpecError(
            f"{spec.variant.value} expects {spec.k} beta coefficients, got {params.beta.size}"
        )


def satisfies_constraints(spec: ModelSpec, params: ParamVector) -> bool:
    """Indicator of the variant's constraint set (flat prior support)"""
    check_dimensions(spec, params)
    beta, gamma = params.beta, params.gamma
    if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(gamma))):
        return False
    if not -1.0 < beta[spec.layout.ar_index] < 1.0:
        return False
    if any(beta[i] >= 0.0 for i in spec.layout.negative):
        return False
    return bool(gamma[0] >= 0.0 and gamma[1] >= 0.0 and 0.0 <= gamma[2] < 1.0)


def support_bounds(spec: ModelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise (lower, upper) bounds of the constraint set over (beta, gamma)"""
    lower = np.full(spec.dim, -np.inf)
    upper = np.full(spec.dim, np.inf)
    ar = spec.layout.ar_index
    lower[ar], upper[ar] = -1.0, 1.0
    for i in spec.layout.negative:
        upper[i] = 0.0
    lower[spec.k :] = 0.0
    upper[spec.k + 2] = 1.0
    return lower, upper


def project_interior(spec: ModelSpec, params: ParamVector, margin: float = INTERIOR_MARGIN) -> ParamVector:
    """Move coordinates outside (or on) the constraint boundary to `margin` inside it"""
    check_dimensions(spec, params)
    values = params.to_array()
    lower, upper = support_bounds(spec)
    # gamma1, gamma2 may sit on their closed lower bound
    closed_lower = np.zeros(spec.dim, dtype=bool)
    closed_lower[spec.k : spec.k + 3] = True

    for i in range(spec.dim):
        low, high = lower[i], upper[i]
        if np.isfinite(low) and (values[i] < low or (values[i] == low and not closed_lower[i])):
            values[i] = low + margin
        if np.isfinite(high) and values[i] >= high:
            values[i] = high - margin
    return ParamVector.from_array(spec, values)


def default_start(spec: ModelSpec) -> ParamVector:
    """beta = -0.1, gamma = 0.1, projected into the constraint set"""
    return project_interior(spec, ParamVector(beta=np.full(spec.k, -0.1), gamma=np.full(GAMMA_SIZE, 0.1)))


@dataclass(frozen=True)
class InitialState:
    q0: float
    es0: float

    def __post_init__(self):
        if not np.isfinite(self.q0) or not np.isfinite(self.es0):
            raise ModelSpecError("Initial VaR/ES must be finite")
        if self.q0 >= 0:
            raise ModelSpecError(f"Initial VaR must be negative, got {self.q0}")
        if self.es0 > self.q0:
            raise ModelSpecError(f"Initial ES {self.es0} must not exceed initial VaR {self.q0}")

    @property
    def w0(self) -> float:
        return self.q0 - self.es0
