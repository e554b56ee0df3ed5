import hashlib
import json
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
from scipy.special import xlogy

SeedLike = Union[None, int, np.random.SeedSequence]


def type7_quantile(values: Sequence[float], prob: Union[float, Sequence[float]]) -> Union[float, np.ndarray]:
    """
    Sample quantile with linear interpolation between order statistics
    (Hyndman-Fan type 7, numpy's "linear" method). Used for credible
    intervals, V(alpha) and the default initial VaR.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("Quantile of an empty sample is undefined")
    result = np.quantile(arr, prob, method="linear")
    return float(result) if np.ndim(result) == 0 else result


def bernoulli_loglik(successes: float, trials: float, prob: float) -> float:
    """k*ln(p) + (n-k)*ln(1-p) with the 0*ln(0) = 0 convention"""
    return float(xlogy(successes, prob) + xlogy(trials - successes, 1.0 - prob))


def make_seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        # copy so that every spawn starts from the first child
        return np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key, pool_size=seed.pool_size)
    return np.random.SeedSequence(seed)


def spawn_seeds(seed: SeedLike, count: int) -> List[np.random.SeedSequence]:
    return make_seed_sequence(seed).spawn(count)


def payload_digest(payload: dict) -> str:
    encoded = json.dumps(payload, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(encoded).hexdigest()


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def array_digest(*arrays: np.ndarray) -> str:
    digest = hashlib.sha256()
    for arr in arrays:
        digest.update(np.ascontiguousarray(arr).tobytes())
    return digest.hexdigest()
