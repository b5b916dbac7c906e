"""Exception hierarchy for the saasel library."""


class SaaselError(Exception):
    """Base class for all library errors."""


class DimensionError(SaaselError, ValueError):
    """Operands have incompatible or invalid dimensions."""


class RankError(SaaselError, ValueError):
    """A rank precondition (full column/row rank) is violated."""


class CapacityError(SaaselError, ValueError):
    """An enumeration exceeds the configured size cap."""


class NumericalError(SaaselError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class SolverUnknownError(NumericalError):
    """The conic backend returned an indeterminate verdict where a definite
    feasible/infeasible answer is required (e.g. inside search pruning)."""


class GainRecoveryError(NumericalError):
    """The LMI certificate was accepted but the feedback gain could not be
    recovered (ill-conditioned M)."""
