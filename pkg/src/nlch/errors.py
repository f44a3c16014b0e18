"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad grid/kernel/parameter values, malformed files."""


class SimulationError(RuntimeError):
    """A run aborted: negativity beyond tolerance, NaN, or solver failure."""

    def __init__(self, message, index=None, value=None, t=None):
        super().__init__(message)
        self.index = index
        self.value = value
        self.t = t
