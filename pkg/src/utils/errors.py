"""Exception hierarchy shared by the library and the CLI"""


class RiskEngineError(Exception):
    """Base class for every error raised on purpose by this package"""


class DataValidationError(RiskEngineError, ValueError):
    """Input series failed ingestion, split or summary preconditions"""


class ModelSpecError(RiskEngineError, ValueError):
    """Unknown variant, bad alpha or parameter layout mismatch"""


class NonFiniteRecursionError(RiskEngineError, ArithmeticError):
    """A VaR/ES recursion produced a non-finite value"""

    def __init__(self, index: int, message: str = ""):
        self.index = index
        super().__init__(message or f"Non-finite recursion value at index {index}")


class SamplerError(RiskEngineError, RuntimeError):
    """MCMC could not start or produced an unusable chain"""


class BacktestError(RiskEngineError, ValueError):
    """An evaluation statistic is undefined for the given forecasts"""


class UsageError(RiskEngineError, ValueError):
    """Command-line misuse; maps to exit code 2"""
