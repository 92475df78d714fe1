from typing import List, Sequence


class MLKPError(Exception):
    """Base class for every error raised by the library."""


class ShapeMismatchError(MLKPError, ValueError):
    pass


class BackwardBeforeForwardError(MLKPError, RuntimeError):
    pass


class ConfigError(MLKPError, ValueError):
    def __init__(self, problems: Sequence[str]):
        self.problems: List[str] = list(problems)
        super().__init__("Invalid configuration: " + "; ".join(self.problems))


class OracleSizeError(MLKPError, ValueError):
    pass


class NumericBlowUpError(MLKPError, ArithmeticError):
    def __init__(self, iteration: int, loss: float):
        self.iteration = iteration
        self.loss = loss
        super().__init__(f"Non-finite loss {loss} at iteration {iteration}")


class WeightArchiveError(MLKPError):
    pass


class BadMagicError(WeightArchiveError):
    pass


class UnsupportedVersionError(WeightArchiveError):
    pass


class TruncatedArchiveError(WeightArchiveError):
    pass


class ParameterNameMismatchError(WeightArchiveError):
    def __init__(self, missing: Sequence[str], unexpected: Sequence[str]):
        self.missing = sorted(missing)
        self.unexpected = sorted(unexpected)
        super().__init__(
            f"Parameter names do not match the model: missing={self.missing}, unexpected={self.unexpected}"
        )
