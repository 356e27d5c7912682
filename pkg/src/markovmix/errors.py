"""Exception hierarchy shared by all modules."""


class MarkovMixError(Exception):
    """Base class for every error raised by this package."""


class ChainValidationError(MarkovMixError, ValueError):
    """Raised when a transition matrix or marginal fails validation."""


class NegativeEntry(ChainValidationError):
    pass


class RowSumViolation(ChainValidationError):
    pass


class NotStationary(ChainValidationError):
    pass


class InvalidChainFile(ChainValidationError):
    pass


class BadParameter(MarkovMixError, ValueError):
    pass


class EmptyPath(MarkovMixError, ValueError):
    pass


class StateSpaceTooLarge(MarkovMixError):
    """Exhaustive subset enumeration was requested on too many states."""


class SubsetTooLarge(StateSpaceTooLarge):
    pass


class NotReversible(MarkovMixError):
    """An operation whose hypothesis is detailed balance got a non-reversible chain."""


class ScoreOutOfUnitBall(MarkovMixError, ValueError):
    pass


class WindowTooSmall(MarkovMixError, ValueError):
    pass


class NoSmallSetFound(MarkovMixError):
    pass


class InvariantViolation(MarkovMixError, AssertionError):
    """A numerically checked identity or inequality did not hold."""
