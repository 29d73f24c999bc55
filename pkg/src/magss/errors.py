class MagssError(Exception):
    """Base class for library errors."""


class ConfigurationError(MagssError, ValueError):
    """Invalid parameters, names or dimensions."""


class CapabilityError(MagssError):
    """The object does not provide the requested capability."""


class IngestionError(MagssError, ValueError):
    """Malformed input data file."""


class EvaluationError(MagssError, ArithmeticError):
    """A density, metric or diagnostic produced a non-finite value."""


class ContractError(MagssError, ValueError):
    """A documented precondition was violated by the caller."""


class IntegrationError(MagssError):
    """Geodesic integration failed.

    ``last_valid_t`` is the largest |t| (on the failing side) for which the
    cached solution is still trustworthy.
    """

    def __init__(self, message, last_valid_t=0.0):
        super().__init__(message)
        self.last_valid_t = last_valid_t
