"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the mathematical domain of the operation
    (e.g. a Bose chemical potential above the spectrum bottom)."""


class AccuracyError(RuntimeError):
    """A numerical routine could not reach the requested accuracy.

    ``estimate`` carries the accuracy that was actually achieved, when known.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ResourceError(RuntimeError):
    """The requested computation exceeds a configured resource budget."""


class ConfigError(ValueError):
    """An experiment configuration failed validation.

    ``field`` names the offending entry.
    """

    def __init__(self, field, reason):
        super().__init__(f"{field}: {reason}")
        self.field = field
        self.reason = reason
