"""Exception types shared across the package."""


class LocomimicError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(LocomimicError, ValueError):
    """A parameter is outside its admissible range."""


class InvalidInputError(LocomimicError, ValueError):
    """A control input violates its contract (e.g. CoP weights not summing to one)."""


class FlightPhaseError(LocomimicError):
    """CoP requested for an empty support set."""


class SingularityError(LocomimicError, ArithmeticError):
    """CoM height too close to zero while in stance."""


class OutOfBoundsError(LocomimicError, IndexError):
    """Terrain query outside the height field."""


class ConfigError(LocomimicError, ValueError):
    """Configuration file could not be parsed or validated."""


class LayoutError(LocomimicError, ValueError):
    """Observation block does not match the declared layout."""
