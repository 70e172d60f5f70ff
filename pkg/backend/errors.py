"""
Exception hierarchy shared by the solver, the experiment harness and the API.
"""
from dataclasses import dataclass
from typing import List, Optional, Tuple


class RiskDPError(Exception):
    """Base class for every domain error raised by the package."""

    def __reduce__(self):
        # subclasses take their own constructor arguments, so rebuild from state
        return _rebuild_error, (type(self), self.args, self.__dict__)


def _rebuild_error(cls, args, state):
    err = cls.__new__(cls)
    Exception.__init__(err, *args)
    err.__dict__.update(state)
    return err


@dataclass(frozen=True)
class NegativeEntry:
    s: int
    a: int
    s_next: int
    value: float

    def __str__(self):
        return f"NegativeEntry(s={self.s}, a={self.a}, s'={self.s_next}, value={self.value:.3g})"


@dataclass(frozen=True)
class RowSumMismatch:
    s: int
    a: int
    deviation: float

    def __str__(self):
        return f"RowSumMismatch(s={self.s}, a={self.a}, deviation={self.deviation:.3g})"


class KernelValidationError(RiskDPError):
    def __init__(self, violations: List[object]):
        self.violations = list(violations)
        shown = ", ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"invalid transition table: {shown}{more}")


class InvalidStart(RiskDPError):
    def __init__(self, start: int, n_states: int):
        self.start = start
        super().__init__(f"start state {start} is outside 0..{n_states - 1}")


class NonConvergence(RiskDPError):
    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"no convergence after {iterations} iterations (residual {residual:.3e})")


class DegenerateAlpha(RiskDPError):
    def __init__(self, alpha: float):
        self.alpha = alpha
        super().__init__(f"CVaR level must lie in (0, 1], got {alpha}")


class LPInfeasible(RiskDPError):
    """The envelope polyhedron is empty."""


class LPUnbounded(RiskDPError):
    """The envelope objective is unbounded (usually a missing normalization row)."""


class UnsupportedRiskSpec(RiskDPError):
    pass


class IterationCapExceeded(RiskDPError):
    def __init__(self, cap: int, residual: float, partial_log: Optional[object] = None):
        self.cap = cap
        self.residual = residual
        self.partial_log = partial_log
        super().__init__(f"value iteration hit its cap of {cap} iterations (residual {residual:.3e})")


class ParseError(RiskDPError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class SchemaViolation(RiskDPError):
    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class CorruptCheckpoint(RiskDPError):
    pass


class CheckpointIOError(RiskDPError):
    def __init__(self, path: str, reason: str):
        self.path = path
        super().__init__(f"cannot access checkpoint '{path}': {reason}")


def first_error_location(errors: List[dict]) -> Tuple[str, str]:
    """Flatten the first pydantic error into (dotted field path, message)."""
    if not errors:
        return "<root>", "invalid document"
    err = errors[0]
    loc = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
    return loc, err.get("msg", "invalid value")
