"""Exception hierarchy shared by the samplers, targets and harness."""


class AgessError(Exception):
    """Base class for all package errors."""


class ContractViolation(AgessError, ValueError):
    """An argument broke an operation's precondition (e.g. a dimension mismatch)."""


class ConfigurationError(AgessError, ValueError):
    """Invalid distribution, sampler or experiment configuration."""


class FactorizationError(AgessError, ArithmeticError):
    """A scale matrix could not be Cholesky-factorized, even after jitter repair."""


class MomentError(AgessError, ArithmeticError):
    """A requested moment does not exist for the chosen family."""


class ChainInitializationError(AgessError, ValueError):
    """The starting state has zero target density."""


class ShrinkageError(AgessError, RuntimeError):
    """The angle-shrinkage loop hit its iteration cap.

    Carries the loop statistics so a stuck chain can be diagnosed.
    """

    def __init__(self, message, *, loop_count, bracket=None, state=None):
        super().__init__(message)
        self.loop_count = loop_count
        self.bracket = bracket
        self.state = state


class DiagnosticsError(AgessError, ValueError):
    """A diagnostic could not be computed from the supplied trace(s)."""
