"""Exception types raised across the package."""


class PrioqnError(Exception):
    """Base class for all package errors."""


class ValidationError(PrioqnError, ValueError):
    """A network description violates a structural requirement."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class ParseError(PrioqnError, ValueError):
    """A spec file could not be read into a network description."""


class SingularRouting(PrioqnError, ArithmeticError):
    """``I - P'`` is numerically singular, so the network is not open."""


class Unstable(PrioqnError, ArithmeticError):
    """A queue (or a whole station) has no stationary distribution."""


class ShapeError(PrioqnError, ValueError):
    """The network does not have the shape an operation requires."""


class CapTooSmall(PrioqnError, ValueError):
    """A truncation cap is below the server count of its station."""


class NotIrreducible(PrioqnError, ArithmeticError):
    """The truncated chain cannot reach states the model says carry mass."""


class ConfigError(PrioqnError, ValueError):
    """Invalid simulation configuration."""
