"""Exception and warning types raised across the package."""

from __future__ import annotations


class PanelSomError(Exception):
    """Base class for every error raised by panelsom."""


class ConfigurationError(PanelSomError, ValueError):
    """Arguments or inputs are inconsistent with each other."""


class ParseError(PanelSomError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class DuplicateKeyError(ParseError):
    pass


class CatalogError(ConfigurationError):
    """Unknown or colliding variable code."""


class DomainError(PanelSomError, ValueError):
    """A numeric input lies outside the domain of the operation."""


class DegenerateVariableError(PanelSomError, ValueError):
    def __init__(self, code: str, message: str = "has zero dispersion"):
        self.code = code
        super().__init__(f"variable {code!r} {message}")


class EmptyObservationError(PanelSomError, ValueError):
    """Every coordinate of an observation is missing."""

    def __init__(self, message: str = "observation has no observed coordinate", key=None):
        self.key = key
        if key is not None:
            message = f"{message} (record {key})"
        super().__init__(message)


class UndefinedFrequenciesError(PanelSomError, ValueError):
    pass


class NumericalError(PanelSomError, ArithmeticError):
    """Numerical failure: non-convergence or a reducible chain."""


class ReducibleChainError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class AbsorbingGapWarning(UserWarning):
    """A transition-count row was empty and has been replaced by a self-loop."""


class NonStochasticWarning(UserWarning):
    """A transition matrix whose rows do not sum to one was supplied."""
