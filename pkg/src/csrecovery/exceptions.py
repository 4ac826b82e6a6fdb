"""Exception types raised across the package."""

import numpy as np


class ContractViolation(ValueError):
    """Inputs violate a documented precondition (shape, range, budget)."""


class SingularMatrixError(np.linalg.LinAlgError):
    def __init__(self, message, column=None):
        super().__init__(message)
        self.column = column


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


class DomainError(ValueError):
    pass


class BracketError(ValueError):
    """The root-finding bracket has no sign change."""


class InfeasibleError(RuntimeError):
    """The linear program has no feasible point (to numerical tolerance)."""


class ExhaustedError(RuntimeError):
    """Every candidate atom has already been selected."""


class UndefinedMetricError(ValueError):
    pass


class PlotError(ValueError):
    """Plot input is inconsistent (ragged x grids, incomplete phase grid)."""


class OutputError(OSError):
    """An output file could not be written; the message names the path."""
