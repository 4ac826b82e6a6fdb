"""Sparse signal recovery from compressive measurements.

Six solvers (basis pursuit, GraDeS, OMP, IHT, fast Laplace and the RVM),
random Toeplitz sensing problems, recovery metrics and a Monte Carlo
benchmark harness.
"""

from .bench import (
    AggregateRow,
    PhaseCell,
    PhaseGridSpec,
    SweepSpec,
    TrialRecord,
    run_phase_diagram,
    run_sweep,
    run_trial,
    theoretical_rho,
)
from .estimators import (
    BasisPursuit,
    FastLaplace,
    GraDeS,
    IterativeHardThresholding,
    OrthogonalMatchingPursuit,
    RelevanceVectorMachine,
)
from .metrics import covariance, recovery_error, success
from .problem import (
    Instance,
    MeasurementMatrix,
    SparseSignal,
    build_gaussian,
    build_toeplitz,
    generate_sparse_signal,
    make_instance,
    measure,
)
from .rng import RngStream, mix_seed
from .solvers import (
    ALGORITHMS,
    RecoveryResult,
    run_solver,
    solve_basis_pursuit,
    solve_fast_laplace,
    solve_grades,
    solve_iht,
    solve_omp,
    solve_rvm,
)

__version__ = "0.1.0"
