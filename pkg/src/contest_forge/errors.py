"""Exception types shared across the package."""


class ContestForgeError(Exception):
    """Base class for every error raised by contest_forge."""


class DomainError(ContestForgeError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonConvergence(ContestForgeError, ArithmeticError):
    """A numerical routine exhausted its budget before meeting its tolerance."""


class NoSignChange(ContestForgeError, ValueError):
    """A root-finding bracket does not straddle a sign change."""


class DimensionMismatch(ContestForgeError, ValueError):
    """A vector argument has the wrong length."""


class RankOutOfRange(ContestForgeError, ValueError):
    """A prize rank lies outside the admissible range."""


class ConfigMismatch(ContestForgeError, ValueError):
    """A contest configuration does not match the shortlist context."""


class BudgetExceeded(ContestForgeError, RuntimeError):
    """An exhaustive search would enumerate too many candidates."""


class AcceptanceTooLow(ContestForgeError, RuntimeError):
    """Rejection sampling accepts too small a fraction of proposals."""


class UnknownFigure(ContestForgeError, ValueError):
    """The requested figure name is not one the CLI knows how to emit."""
