from dataclasses import dataclass, field

import numpy as np

from ..exceptions import ContractViolation


@dataclass
class RecoveryResult:
    """Estimated signal plus solver diagnostics."""

    x_hat: np.ndarray
    iterations: int
    elapsed_seconds: float = 0.0
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def support(self):
        return np.flatnonzero(self.x_hat)


def as_sensing(phi):
    """Return the dense array behind a sensing operator."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim != 2:
        raise ContractViolation(f"sensing matrix must be 2-D, got shape {phi.shape}")
    return phi


def check_measurements(y, phi):
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != phi.shape[0]:
        raise ContractViolation(
            f"y has shape {y.shape}, sensing matrix has {phi.shape[0]} rows"
        )
    if not np.all(np.isfinite(y)):
        raise ContractViolation("y contains non-finite entries")
    return y


def check_budget(s, n):
    if not isinstance(s, (int, np.integer)) or not 1 <= s <= n:
        raise ContractViolation(f"sparsity budget must be an integer in [1, {n}], got {s!r}")
    return int(s)
