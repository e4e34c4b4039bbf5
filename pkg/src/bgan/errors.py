"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration: bad dimensions, weights, graph, or config keys."""


class TrainingError(RuntimeError):
    """A training step was fed bad batches or produced non-finite values."""


class ConvergenceError(RuntimeError):
    """An iterative solver failed to reach tolerance.

    Carries the last residual and the number of iterations performed so
    callers can report how far the solve got.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
