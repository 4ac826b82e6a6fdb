"""Sparse signals, sensing matrices and noisy measurements."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .exceptions import ContractViolation
from .rng import RngStream

AMPLITUDE_MODELS = ("rademacher", "gaussian")
MATRIX_KINDS = ("toeplitz", "gaussian")


@dataclass(frozen=True)
class SparseSignal:
    values: np.ndarray
    support: np.ndarray

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def k(self):
        return self.support.shape[0]


@dataclass(frozen=True)
class MeasurementMatrix:
    """Dense M x N sensing operator.

    ``column_norms`` holds the l2 norms the raw columns were divided by, so
    ``entries * column_norms`` gives back the pre-normalization matrix.
    """

    entries: np.ndarray
    kind: str
    column_normalized: bool
    column_norms: np.ndarray

    @property
    def m(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def raw(self):
        return self.entries * self.column_norms

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class Instance:
    signal: SparseSignal
    matrix: MeasurementMatrix
    y: np.ndarray
    sigma: float


def _readonly(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def generate_sparse_signal(n, k, amplitude_model="rademacher", rng=None):
    if not 0 <= k <= n:
        raise ContractViolation(f"need 0 <= k <= n, got k={k}, n={n}")
    if amplitude_model not in AMPLITUDE_MODELS:
        raise ContractViolation(f"unknown amplitude model {amplitude_model!r}")
    rng = rng if rng is not None else RngStream(0)
    support = np.sort(rng.permutation_prefix(n, k))
    if amplitude_model == "rademacher":
        amplitudes = np.where(rng.uniform(k) < 0.5, -1.0, 1.0)
    else:
        amplitudes = rng.gaussian(k)
        # an exact zero would silently shrink the support
        amplitudes[amplitudes == 0.0] = 1.0
    values = np.zeros(n)
    values[support] = amplitudes
    support.setflags(write=False)
    return SparseSignal(values=_readonly(values), support=support)


def _check_shape(m, n):
    if not 1 <= m <= n:
        raise ContractViolation(f"need 1 <= m <= n, got m={m}, n={n}")


def _finish(raw, kind, normalize):
    if not normalize:
        return MeasurementMatrix(
            entries=_readonly(raw),
            kind=kind,
            column_normalized=False,
            column_norms=_readonly(np.ones(raw.shape[1])),
        )
    norms = np.linalg.norm(raw, axis=0)
    # a zero column cannot be normalized; leave it as is
    norms = np.where(norms > 0, norms, 1.0)
    return MeasurementMatrix(
        entries=_readonly(raw / norms),
        kind=kind,
        column_normalized=True,
        column_norms=_readonly(norms),
    )


def build_toeplitz(m, n, rng=None, normalize=True):
    """Toeplitz matrix with ``A[i, j] = c[j - i]``.

    The ``m + n - 1`` generator values ``c[-(m-1)], ..., c[n-1]`` are iid
    standard normal, drawn in that order.  With ``normalize`` each column is
    then scaled to unit l2 norm.
    """
    _check_shape(m, n)
    rng = rng if rng is not None else RngStream(0)
    c = rng.gaussian(m + n - 1)
    first_row = c[m - 1:]
    first_col = c[m - 1::-1]
    return _finish(toeplitz(first_col, first_row), "toeplitz", normalize)


def build_gaussian(m, n, rng=None, normalize=True):
    _check_shape(m, n)
    rng = rng if rng is not None else RngStream(0)
    return _finish(rng.gaussian((m, n)), "gaussian", normalize)


def build_matrix(kind, m, n, rng=None, normalize=True):
    if kind == "toeplitz":
        return build_toeplitz(m, n, rng, normalize)
    if kind == "gaussian":
        return build_gaussian(m, n, rng, normalize)
    raise ContractViolation(f"unknown matrix kind {kind!r}")


def measure(matrix, signal, sigma, rng=None):
    """``y = phi @ x + noise`` with iid N(0, sigma^2) noise."""
    phi = np.asarray(matrix, dtype=float)
    x = signal.values if isinstance(signal, SparseSignal) else np.asarray(signal, dtype=float)
    if phi.shape[1] != x.shape[0]:
        raise ContractViolation(
            f"dimension mismatch: matrix has {phi.shape[1]} columns, signal length {x.shape[0]}"
        )
    if sigma < 0:
        raise ContractViolation(f"sigma must be >= 0, got {sigma}")
    y = phi @ x
    if sigma > 0:
        rng = rng if rng is not None else RngStream(0)
        y = y + sigma * rng.gaussian(phi.shape[0])
    return _readonly(y)


# stream ids for the three independent roles within one trial
SIGNAL_STREAM, MATRIX_STREAM, NOISE_STREAM = 0, 1, 2


def make_instance(n, m, k, sigma, seed, matrix_kind="toeplitz", amplitude_model="rademacher",
                  normalize=True):
    """Build the (signal, matrix, y) triple for one trial seed."""
    if not k <= m <= n:
        raise ContractViolation(f"need k <= m <= n, got n={n}, m={m}, k={k}")
    signal = generate_sparse_signal(n, k, amplitude_model, RngStream(seed, SIGNAL_STREAM))
    matrix = build_matrix(matrix_kind, m, n, RngStream(seed, MATRIX_STREAM), normalize)
    y = measure(matrix, signal, sigma, RngStream(seed, NOISE_STREAM))
    return Instance(signal=signal, matrix=matrix, y=y, sigma=float(sigma))
