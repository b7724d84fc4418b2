class ConfigurationError(ValueError):
    """Invalid configuration: bad dimensions, parameters, or config files."""


class DivergenceError(RuntimeError):
    """Solver iterates blew up (NaN or norm growth past the safety bound).

    Carries the partial trace so callers can inspect the run up to the
    abort point.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
