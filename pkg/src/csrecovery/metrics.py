"""Recovery-quality metrics."""

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation, UndefinedMetricError

DEFAULT_SUCCESS_THRESHOLD = 1e-2


@dataclass(frozen=True)
class MetricReport:
    recovery_error: float
    covariance: float
    correlation: float
    success: bool
    elapsed_seconds: float = 0.0


def _pair(x_o, x_r, min_len=1):
    x_o = np.asarray(x_o, dtype=float)
    x_r = np.asarray(x_r, dtype=float)
    if x_o.ndim != 1 or x_o.shape != x_r.shape:
        raise ContractViolation(f"need equal-length vectors, got {x_o.shape} and {x_r.shape}")
    if x_o.shape[0] < min_len:
        raise ContractViolation(f"need length >= {min_len}, got {x_o.shape[0]}")
    return x_o, x_r


def recovery_error(x_o, x_r):
    """Relative l1 error ``||x_o - x_r||_1 / ||x_o||_1``."""
    x_o, x_r = _pair(x_o, x_r)
    ref = np.abs(x_o).sum()
    if ref == 0:
        raise UndefinedMetricError("recovery error is undefined for an all-zero reference signal")
    return float(np.abs(x_o - x_r).sum() / ref)


def covariance(x_o, x_r):
    """Coordinate-wise covariance and correlation of two signals.

    Both use the population (``1/N``) normalization.  Returns ``(cov, corr)``;
    raises :class:`UndefinedMetricError` when either vector is constant, in
    which case the covariance is attached as ``err.covariance``.
    """
    x_o, x_r = _pair(x_o, x_r, min_len=2)
    d_o = x_o - x_o.mean()
    d_r = x_r - x_r.mean()
    cov = float(np.mean(d_o * d_r))
    sd_o = float(np.sqrt(np.mean(d_o * d_o)))
    sd_r = float(np.sqrt(np.mean(d_r * d_r)))
    if sd_o == 0 or sd_r == 0:
        err = UndefinedMetricError("correlation is undefined for a constant vector")
        err.covariance = cov
        raise err
    corr = cov / (sd_o * sd_r)
    return cov, float(np.clip(corr, -1.0, 1.0))


def success(x_o, x_r, threshold=DEFAULT_SUCCESS_THRESHOLD):
    """True when the recovery error is at most ``threshold``."""
    return recovery_error(x_o, x_r) <= threshold


def evaluate(x_o, x_r, threshold=DEFAULT_SUCCESS_THRESHOLD, elapsed_seconds=0.0):
    """All metrics at once; an undefined correlation is reported as NaN."""
    err = recovery_error(x_o, x_r)
    try:
        cov, corr = covariance(x_o, x_r)
    except UndefinedMetricError as exc:
        cov, corr = getattr(exc, "covariance", float("nan")), float("nan")
    return MetricReport(
        recovery_error=err,
        covariance=cov,
        correlation=corr,
        success=err <= threshold,
        elapsed_seconds=float(elapsed_seconds),
    )
