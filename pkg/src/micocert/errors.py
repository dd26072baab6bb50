"""Exception hierarchy shared by all modules."""


class MicoError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(MicoError, ValueError):
    """A point or vector does not match the expected dimension."""


class ModelError(MicoError, ValueError):
    """Malformed expression, problem, or file contents."""


class NumericalError(MicoError):
    """The LP kernel lost numerical control (e.g. pivot blow-up)."""


class BudgetExceeded(MicoError):
    """An enumeration exceeded its configured cap."""


class NoValidSubset(MicoError):
    """Doignon selection found no lattice-free subset of the allowed size."""


class SolverStalled(MicoError):
    """Cutting-plane iteration cap reached before the gap closed.

    ``best`` carries the best iterate found so far (may be ``None``).
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class StationarityResidualTooLarge(MicoError):
    """Multiplier recovery could not make the continuous block vanish."""

    def __init__(self, message, residual=None, point=None):
        super().__init__(message)
        self.residual = residual
        self.point = point


class NoFeasibleFiber(MicoError):
    """No integer fiber inside the box admits a feasible point."""


class NoFeasiblePoint(MicoError):
    """The brute-force oracle found no feasible grid point."""


class SlaterViolated(MicoError):
    """Some feasible fiber has no strictly feasible continuous point."""

    def __init__(self, message, fibers=()):
        super().__init__(message)
        self.fibers = list(fibers)


class DegenerateRow(MicoError):
    """An infeasible certificate row has non-positive aggregated violation."""


class Inconclusive(MicoError):
    """A lattice-freeness question could not be settled (unbounded region)."""
