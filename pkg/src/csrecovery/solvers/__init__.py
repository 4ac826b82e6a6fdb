"""Sparse recovery solvers and a name-based registry used by the harness."""

from ..exceptions import ContractViolation
from ._common import RecoveryResult
from .bayesian import (
    FastLaplaceConfig,
    RvmConfig,
    solve_fast_laplace,
    solve_rvm,
)
from .convex import BpConfig, GradesConfig, lp_primal_dual, solve_basis_pursuit, solve_grades
from .greedy import (
    IhtConfig,
    OmpConfig,
    hard_threshold,
    restricted_least_squares,
    select_atom,
    solve_iht,
    solve_omp,
)

ALGORITHMS = ("bp", "grades", "omp", "iht", "laplace", "rvm")

# solvers that need the sparsity level as an input
SPARSITY_AWARE = frozenset({"grades", "omp", "iht"})


def run_solver(name, y, phi, k=None):
    """Run solver ``name`` with its default configuration.

    ``k`` is the sparsity level handed to the sparsity-aware solvers; OMP
    uses ``min(k, M)`` atoms when it is given and ``M // 2`` otherwise.
    """
    if name == "bp":
        return solve_basis_pursuit(y, phi)
    if name == "laplace":
        return solve_fast_laplace(y, phi)
    if name == "rvm":
        return solve_rvm(y, phi)
    if name == "omp":
        m = phi.shape[0]
        return solve_omp(y, phi, OmpConfig(max_atoms=min(k, m) if k else None))
    if name not in ALGORITHMS:
        raise ContractViolation(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    if k is None:
        raise ContractViolation(f"{name} needs the sparsity level k")
    if name == "grades":
        return solve_grades(y, phi, k)
    return solve_iht(y, phi, k)


__all__ = [
    "ALGORITHMS",
    "SPARSITY_AWARE",
    "BpConfig",
    "FastLaplaceConfig",
    "GradesConfig",
    "IhtConfig",
    "OmpConfig",
    "RecoveryResult",
    "RvmConfig",
    "hard_threshold",
    "lp_primal_dual",
    "restricted_least_squares",
    "run_solver",
    "select_atom",
    "solve_basis_pursuit",
    "solve_fast_laplace",
    "solve_grades",
    "solve_iht",
    "solve_omp",
    "solve_rvm",
]
