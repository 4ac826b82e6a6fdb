"""Monte Carlo benchmark harness: parameter sweeps and phase-transition grids.

Every trial is identified by a seed ``mix_seed(base_seed, point_index,
trial_index)``.  At a given point all algorithms are run on the same
``(signal, matrix, y)`` triple, so comparisons between algorithms are paired.
"""

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation, DomainError
from .metrics import DEFAULT_SUCCESS_THRESHOLD, evaluate
from .problem import AMPLITUDE_MODELS, MATRIX_KINDS, make_instance
from .rng import mix_seed
from .solvers import ALGORITHMS, run_solver

log = logging.getLogger(__name__)

# Benchmark instances use the raw Toeplitz generator (iid N(0, 1) entries,
# column norms close to sqrt(M)) and Gaussian spike amplitudes; see README.
DEFAULT_AMPLITUDE = "gaussian"
DEFAULT_NORMALIZE = False


class SweepError(RuntimeError):
    """A trial failed; ``records`` holds every trial finished before it."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class TrialRecord:
    algo: str
    n: int
    m: int
    k: int
    sigma: float
    trial_index: int
    seed: int
    recovery_error: float
    covariance: float
    correlation: float
    elapsed_seconds: float
    success: bool
    converged: bool


@dataclass(frozen=True)
class AggregateRow:
    algo: str
    n: int
    m: int
    k: int
    sigma: float
    trials: int
    mean_error: float
    std_error: float
    mean_time_seconds: float
    mean_correlation: float  # percent
    success_rate: float


@dataclass(frozen=True)
class PhaseCell:
    algo: str
    delta: float
    rho: float
    n: int
    m: int
    k: int
    trials: int
    success_rate: float


def _check_algorithms(algorithms):
    algorithms = tuple(algorithms)
    if not algorithms:
        raise ContractViolation("at least one algorithm is required")
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise ContractViolation(
            f"unknown algorithm(s) {', '.join(unknown)}; choose from {', '.join(ALGORITHMS)}"
        )
    return algorithms


def _check_instance_options(matrix_kind, amplitude_model, sigma, trials):
    if matrix_kind not in MATRIX_KINDS:
        raise ContractViolation(f"unknown matrix kind {matrix_kind!r}")
    if amplitude_model not in AMPLITUDE_MODELS:
        raise ContractViolation(f"unknown amplitude model {amplitude_model!r}")
    if not sigma >= 0:
        raise ContractViolation(f"sigma must be >= 0, got {sigma}")
    if trials < 1:
        raise ContractViolation(f"trials must be >= 1, got {trials}")


@dataclass(frozen=True)
class SweepSpec:
    """One curve family: vary ``m`` (with ``fixed_k``) or ``k`` (with ``fixed_m``).

    ``start:stop:step`` is inclusive of ``stop``.
    """

    algorithms: tuple
    vary: str
    start: int
    stop: int
    step: int
    n: int = 1024
    fixed_m: int = 200
    fixed_k: int = 50
    sigma: float = 0.005
    trials: int = 100
    base_seed: int = 42
    matrix_kind: str = "toeplitz"
    amplitude_model: str = DEFAULT_AMPLITUDE
    normalize_columns: bool = DEFAULT_NORMALIZE
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD
    sequential_timing: bool = True

    def __post_init__(self):
        object.__setattr__(self, "algorithms", _check_algorithms(self.algorithms))
        if self.vary not in ("m", "k"):
            raise ContractViolation(f"vary must be 'm' or 'k', got {self.vary!r}")
        if self.step < 1:
            raise ContractViolation(f"range step must be >= 1, got {self.step}")
        if self.stop < self.start:
            raise ContractViolation(f"empty range {self.start}:{self.stop}:{self.step}")
        _check_instance_options(self.matrix_kind, self.amplitude_model, self.sigma, self.trials)
        for m, k in self.points():
            if not 1 <= k <= m <= self.n:
                raise ContractViolation(f"need 1 <= k <= m <= n at every point, got n={self.n}, m={m}, k={k}")

    def points(self):
        """``(m, k)`` pairs in sweep order."""
        values = range(self.start, self.stop + 1, self.step)
        if self.vary == "m":
            return [(v, self.fixed_k) for v in values]
        return [(self.fixed_m, v) for v in values]


@dataclass(frozen=True)
class PhaseGridSpec:
    """Uniform ``grid_steps x grid_steps`` lattice over ``(delta, rho) in (0, 1]^2``."""

    algorithms: tuple
    n: int = 256
    grid_steps: int = 10
    trials: int = 20
    base_seed: int = 42
    sigma: float = 0.0
    matrix_kind: str = "toeplitz"
    amplitude_model: str = DEFAULT_AMPLITUDE
    normalize_columns: bool = DEFAULT_NORMALIZE
    success_threshold: float = DEFAULT_SUCCESS_THRESHOLD

    def __post_init__(self):
        object.__setattr__(self, "algorithms", _check_algorithms(self.algorithms))
        if self.grid_steps < 1:
            raise ContractViolation(f"grid_steps must be >= 1, got {self.grid_steps}")
        if self.n < 1:
            raise ContractViolation(f"n must be >= 1, got {self.n}")
        _check_instance_options(self.matrix_kind, self.amplitude_model, self.sigma, self.trials)

    def cells(self):
        """``(delta, rho, m, k)`` for every cell, delta-major."""
        out = []
        for i in range(1, self.grid_steps + 1):
            delta = i / self.grid_steps
            m = max(1, _round_half_up(delta * self.n))
            for j in range(1, self.grid_steps + 1):
                rho = j / self.grid_steps
                k = max(1, _round_half_up(rho * m))
                out.append((delta, rho, m, k))
        return out


def _round_half_up(v):
    return int(math.floor(v + 0.5))


def theoretical_rho(delta):
    """Asymptotic transition curve ``rho(delta) = 1 / (2 ln(1/delta))``."""
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    return 1.0 / (2.0 * math.log(1.0 / delta))


def _run_on_instance(algorithm, inst, seed, trial_index, threshold):
    phi = inst.matrix.entries
    k = inst.signal.k
    start = time.perf_counter()
    result = run_solver(algorithm, inst.y, phi, k)
    elapsed = time.perf_counter() - start
    report = evaluate(inst.signal.values, result.x_hat, threshold, elapsed)
    return TrialRecord(
        algo=algorithm,
        n=inst.signal.n,
        m=inst.matrix.m,
        k=k,
        sigma=inst.sigma,
        trial_index=trial_index,
        seed=seed,
        recovery_error=report.recovery_error,
        covariance=report.covariance,
        correlation=report.correlation,
        elapsed_seconds=elapsed,
        success=report.success,
        converged=bool(result.converged),
    )


def run_trial(algorithm, n, m, k, sigma, seed, trial_index=0, matrix_kind="toeplitz",
              amplitude_model=DEFAULT_AMPLITUDE, normalize_columns=DEFAULT_NORMALIZE,
              success_threshold=DEFAULT_SUCCESS_THRESHOLD):
    """Generate the instance for ``seed``, solve it and score the result."""
    _check_algorithms([algorithm])
    if not 1 <= k <= m <= n:
        raise ContractViolation(f"need 1 <= k <= m <= n, got n={n}, m={m}, k={k}")
    inst = make_instance(n, m, k, sigma, seed, matrix_kind, amplitude_model, normalize_columns)
    return _run_on_instance(algorithm, inst, seed, trial_index, success_threshold)


def _trial_batch(args):
    """All algorithms on one instance; module level so it pickles."""
    (algorithms, n, m, k, sigma, seed, trial_index, matrix_kind, amplitude_model,
     normalize, threshold) = args
    inst = make_instance(n, m, k, sigma, seed, matrix_kind, amplitude_model, normalize)
    return [_run_on_instance(a, inst, seed, trial_index, threshold) for a in algorithms]


def _run_jobs(jobs, context, workers):
    """Run ``_trial_batch`` jobs, returning records in job order.

    On failure raises :class:`SweepError` carrying the records of every job
    that finished before the failing one.
    """
    done = []
    if workers <= 1:
        for job, ctx in zip(jobs, context):
            try:
                done.append(_trial_batch(job))
            except Exception as exc:
                raise SweepError(f"trial failed ({ctx}): {exc}", _flatten(done)) from exc
        return _flatten(done)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_trial_batch, job) for job in jobs]
        for fut, ctx in zip(futures, context):
            try:
                done.append(fut.result())
            except Exception as exc:
                for f in futures:
                    f.cancel()
                raise SweepError(f"trial failed ({ctx}): {exc}", _flatten(done)) from exc
    return _flatten(done)


def _flatten(batches):
    return [rec for batch in batches for rec in batch]


def aggregate(records, algorithms=None):
    """Collapse trial records into one row per ``(point, algorithm)``.

    Rows are ordered by point (first appearance) then by ``algorithms``.
    ``std_error`` is the sample standard deviation (0 for a single trial).
    An undefined trial correlation (constant estimate) counts as 0.
    """
    groups = {}
    for rec in records:
        groups.setdefault((rec.n, rec.m, rec.k, rec.sigma), {}).setdefault(rec.algo, []).append(rec)
    rows = []
    for (n, m, k, sigma), by_algo in groups.items():
        order = algorithms or sorted(by_algo)
        for algo in order:
            recs = by_algo.get(algo)
            if not recs:
                continue
            errors = np.array([r.recovery_error for r in recs])
            corr = np.array([r.correlation for r in recs])
            corr = np.where(np.isnan(corr), 0.0, corr)
            rows.append(AggregateRow(
                algo=algo,
                n=n,
                m=m,
                k=k,
                sigma=sigma,
                trials=len(recs),
                mean_error=float(errors.mean()),
                std_error=float(errors.std(ddof=1)) if len(recs) > 1 else 0.0,
                mean_time_seconds=float(np.mean([r.elapsed_seconds for r in recs])),
                mean_correlation=100.0 * float(corr.mean()),
                success_rate=float(np.mean([r.success for r in recs])),
            ))
    return rows


def run_sweep(spec, workers=1, return_records=False):
    """Run every point of ``spec``; returns aggregate rows in sweep order.

    ``workers > 1`` spreads trials over processes, but only when
    ``spec.sequential_timing`` is off.  With ``return_records`` the result is
    ``(rows, records)``.
    """
    if spec.sequential_timing:
        workers = 1
    jobs, context = [], []
    for p, (m, k) in enumerate(spec.points()):
        for t in range(spec.trials):
            seed = mix_seed(spec.base_seed, p, t)
            jobs.append((spec.algorithms, spec.n, m, k, spec.sigma, seed, t, spec.matrix_kind,
                         spec.amplitude_model, spec.normalize_columns, spec.success_threshold))
            context.append(f"point {p} (m={m}, k={k}), trial {t}")
    log.info("sweep: %d points x %d trials x %d algorithms",
             len(spec.points()), spec.trials, len(spec.algorithms))
    records = _run_jobs(jobs, context, workers)
    rows = aggregate(records, spec.algorithms)
    return (rows, records) if return_records else rows


def run_phase_diagram(spec, workers=1, return_records=False):
    """Empirical success rate on every ``(delta, rho)`` cell of the grid.

    Cells come out delta-major, one per algorithm, in ``spec.algorithms``
    order within each cell.
    """
    cells = spec.cells()
    jobs, context = [], []
    for c, (delta, rho, m, k) in enumerate(cells):
        for t in range(spec.trials):
            seed = mix_seed(spec.base_seed, c, t)
            jobs.append((spec.algorithms, spec.n, m, k, spec.sigma, seed, t, spec.matrix_kind,
                         spec.amplitude_model, spec.normalize_columns, spec.success_threshold))
            context.append(f"cell {c} (delta={delta:g}, rho={rho:g}), trial {t}")
    log.info("phase grid: %d cells x %d trials x %d algorithms",
             len(cells), spec.trials, len(spec.algorithms))
    records = _run_jobs(jobs, context, workers)

    per_cell = len(spec.algorithms) * spec.trials
    out = []
    for c, (delta, rho, m, k) in enumerate(cells):
        chunk = records[c * per_cell:(c + 1) * per_cell]
        for algo in spec.algorithms:
            hits = [r.success for r in chunk if r.algo == algo]
            out.append(PhaseCell(algo=algo, delta=delta, rho=rho, n=spec.n, m=m, k=k,
                                 trials=len(hits), success_rate=float(np.mean(hits))))
    return (out, records) if return_records else out


def nearest_cells(cells, delta, rho, count=3):
    """The ``count`` cells closest to ``(delta, rho)``.

    Ties in Euclidean distance go to the smaller delta, then the smaller rho.
    """
    def key(c):
        return (round(math.hypot(c.delta - delta, c.rho - rho), 12), c.delta, c.rho)
    return sorted(cells, key=key)[:count]
