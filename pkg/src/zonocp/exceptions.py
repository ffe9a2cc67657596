"""Exception hierarchy shared by all zonocp modules."""


class ZonoError(Exception):
    """Base class for errors raised by zonocp."""


class DimensionError(ZonoError, ValueError):
    """Array shapes do not agree."""


class DataError(ZonoError, ValueError):
    """Input data is malformed or unusable."""


class SolverError(ZonoError, RuntimeError):
    """The LP/MILP layer failed to produce a usable answer."""


class InfeasibleError(SolverError):
    """A program has no feasible point.

    ``measurements`` lists calibration indices blamed for the infeasibility,
    when they could be identified.
    """

    def __init__(self, message, measurements=None):
        super().__init__(message)
        self.measurements = list(measurements or [])


class IterationLimitError(SolverError):
    def __init__(self, iterations):
        super().__init__(f"simplex iteration cap exceeded after {iterations} iterations")
        self.iterations = iterations


class VolumeBudgetError(ZonoError):
    """Exact volume would need too many determinant terms; use projected_volume."""


class TrainingError(ZonoError, RuntimeError):
    """Base-predictor training diverged."""
