"""Exception hierarchy.  Every error raised on bad input is a ``ValueError``."""


class ResoptError(ValueError):
    """Base class for invalid-input errors raised by this package."""


class InvalidSpotRatio(ResoptError):
    pass


class CurvatureOutOfRange(ResoptError):
    pass


class DomainError(ResoptError):
    """A probability (or similar bounded quantity) lies outside its domain."""


class NotOnCurve(ResoptError):
    """A premium that no probability in [0, 1] produces."""


class InvalidFriction(ResoptError):
    pass


class InfeasibleSwapSchedule(ResoptError):
    pass


class InvalidDistribution(ResoptError):
    pass


class InvalidPricing(ResoptError):
    pass


class ConfigError(ResoptError):
    """Simulation or scenario configuration failed validation.

    ``field`` names the offending setting when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field
