"""Exception hierarchy shared across the package."""


class FerglabError(Exception):
    """Base class for all errors raised by ferglab."""


class DimensionError(FerglabError, ValueError):
    """Arrays that must share an index set do not."""


class StochasticityError(FerglabError, ValueError):
    """A kernel row or a probability vector is not normalized / nonnegative."""

    def __init__(self, message, row=None, row_sum=None):
        super().__init__(message)
        self.row = row
        self.row_sum = row_sum


class MetricError(FerglabError, ValueError):
    """A distance matrix violates the metric axioms."""


class ConfigError(FerglabError, ValueError):
    """A model configuration document is malformed."""


class ZeroLikelihood(FerglabError):
    """An observation has zero predictive probability under the current state."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class AtomCapExceeded(FerglabError):
    """Exact enumeration of the filter kernel would exceed the atom budget."""


class LPError(FerglabError):
    """Base class for linear-programming failures."""


class LPInfeasible(LPError):
    pass


class LPUnbounded(LPError):
    pass


class LPSizeError(LPError):
    pass


class LPNumericalError(LPError):
    """Solver finished but its optimality certificate did not verify."""
