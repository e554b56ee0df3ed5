"""Runtime configuration: environment constants plus YAML run configs"""
import os
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from dotenv import load_dotenv

load_dotenv()

BASE_DIR = Path(__file__).parent.parent.parent

DATABASE_PATH = os.getenv("DATABASE_PATH", "data/runs.db")
DATABASE_FULL_PATH = BASE_DIR / DATABASE_PATH

OUTPUT_DIR = os.getenv("OUTPUT_DIR", "output")
MAX_WORKERS = int(os.getenv("MAX_WORKERS", "1"))

MCMC_ITERATIONS = int(os.getenv("MCMC_ITERATIONS", "20000"))
MCMC_BURN_IN = int(os.getenv("MCMC_BURN_IN", "8000"))
MCMC_THIN = int(os.getenv("MCMC_THIN", "4"))
DEFAULT_ALPHAS = tuple(float(a) for a in os.getenv("DEFAULT_ALPHAS", "0.01,0.025").split(","))

BOOTSTRAP_REPLICATIONS = int(os.getenv("BOOTSTRAP_REPLICATIONS", "999"))
BOOTSTRAP_BLOCK_LENGTH = float(os.getenv("BOOTSTRAP_BLOCK_LENGTH", "50"))
MURPHY_GRID_POINTS = int(os.getenv("MURPHY_GRID_POINTS", "501"))
DQ_LAGS = int(os.getenv("DQ_LAGS", "4"))

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FILE = os.getenv("LOG_FILE", "logs/riskcast.log")
LOG_FULL_PATH = BASE_DIR / LOG_FILE

RUN_CONFIG_SECTIONS = ("mcmc", "rolling", "bootstrap", "data", "murphy")

(BASE_DIR / "logs").mkdir(exist_ok=True)


def load_run_config(path: Optional[Path]) -> Dict[str, Dict[str, Any]]:
    """
    Load a sectioned YAML run configuration.

    Unknown sections are rejected so that typos do not silently fall back
    to defaults. A missing path yields empty sections.
    """
    sections: Dict[str, Dict[str, Any]] = {name: {} for name in RUN_CONFIG_SECTIONS}
    if path is None:
        return sections

    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}

    if not isinstance(raw, dict):
        raise ValueError(f"Config file {path} must contain a mapping of sections")

    for name, values in raw.items():
        if name not in sections:
            raise ValueError(f"Unknown config section '{name}' in {path}")
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ValueError(f"Config section '{name}' must be a mapping")
        sections[name].update(values)

    return sections


def merge_overrides(section: Dict[str, Any], **flags: Any) -> Dict[str, Any]:
    """Flags win over file values; flags left at None are ignored."""
    merged = dict(section)
    merged.update({key: value for key, value in flags.items() if value is not None})
    return merged
