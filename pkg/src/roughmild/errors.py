"""Exception hierarchy shared by all roughmild modules."""

from typing import List, Optional


class RoughMildError(RuntimeError):
    pass


class DegenerateInputError(RoughMildError):
    """Input has too few points (or is otherwise empty) for the operation."""


class ParameterError(RoughMildError, ValueError):
    """A numeric parameter is outside its admissible range."""


class IndexRangeError(RoughMildError, IndexError):
    pass


class DimensionMismatchError(RoughMildError, ValueError):
    pass


class ContractError(RoughMildError):
    """Role, kind or reference mismatch between arguments."""


class CoefficientEvaluationError(RoughMildError):
    """A coefficient evaluator returned non-finite values."""

    def __init__(self, message: str, t: float, y):
        super().__init__(f"{message} (t={t!r}, y={y!r})")
        self.t = t
        self.y = y


class CholeskyError(RoughMildError):
    pass


class InvariantViolation(RoughMildError):
    """A structural identity failed its stated tolerance."""


class SolverFailure(RoughMildError):
    """Window shrunk below the minimum without contraction."""

    def __init__(self, message: str, history: Optional[List[float]] = None,
                 window: Optional[tuple] = None):
        super().__init__(message)
        self.history = list(history or [])
        self.window = window


class ConfigError(RoughMildError):
    def __init__(self, message: str, line: Optional[int] = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")
        self.line = line


class RoughPathFormatError(RoughMildError):
    pass
