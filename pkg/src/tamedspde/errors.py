"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid model, basis, schedule or run configuration."""


class IntegrationError(RuntimeError):
    """A time integration produced a non-finite state.

    ``step`` is the index of the step whose output was non-finite.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericError(ArithmeticError):
    """A drift or norm evaluation produced non-finite values."""
