"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class ScccError(Exception):
    """Base class for all library errors."""


class ConfigurationError(ScccError, ValueError):
    """Malformed code description or configuration file."""


class ContractError(ScccError, ValueError):
    """Frame lengths or shapes do not match what an operation requires."""


class DomainError(ScccError, ValueError):
    """A parameter lies outside the range where the operation is defined."""


class UndefinedRateError(DomainError):
    pass


class InfeasibleDimensionsError(DomainError):
    """No valid (d1, d2) split for the requested rate and d2.

    ``feasible`` carries the closed interval of admissible d2 values, or None
    when the rate itself is unreachable.
    """

    def __init__(self, message: str, feasible: tuple[int, int] | None = None):
        if feasible is not None:
            message = f"{message} (feasible d2 interval: [{feasible[0]}, {feasible[1]}])"
        super().__init__(message)
        self.feasible = feasible


class ConstructionError(ScccError, RuntimeError):
    """A randomized construction did not succeed within its restart limit."""


class EnumerationError(ScccError, RuntimeError):
    """Enumerator truncation limits exclude every nonzero term."""


class TruncationMismatchError(ContractError):
    pass


class NonConvergenceError(ScccError, RuntimeError):
    """A bisection or root search found no solution inside its bracket."""


EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_NONCONVERGENCE = 3


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (NonConvergenceError, ConstructionError)):
        return EXIT_NONCONVERGENCE
    if isinstance(exc, (DomainError, ConfigurationError, ContractError, EnumerationError)):
        return EXIT_INFEASIBLE
    return 1
