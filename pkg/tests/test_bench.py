import math
from dataclasses import replace

import numpy as np
import pytest

from csrecovery.bench import (
    PhaseGridSpec,
    SweepSpec,
    aggregate,
    nearest_cells,
    run_phase_diagram,
    run_sweep,
    run_trial,
    theoretical_rho,
)
from csrecovery.exceptions import ContractViolation, DomainError
from csrecovery.rng import mix_seed


def _strip_time(records):
    return [replace(r, elapsed_seconds=0.0) for r in records]


class TestTheoreticalRho:
    def test_values(self):
        assert theoretical_rho(0.1) == pytest.approx(0.217147, abs=1e-6)
        assert theoretical_rho(math.exp(-0.5)) == pytest.approx(1.0, abs=1e-12)
        assert theoretical_rho(0.01) == pytest.approx(0.108574, abs=1e-6)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.5, 2.0])
    def test_domain(self, bad):
        with pytest.raises(DomainError):
            theoretical_rho(bad)


class TestRunTrial:
    def test_bitwise_repeatable(self):
        a = run_trial("omp", 128, 48, 6, 0.005, seed=99)
        b = run_trial("omp", 128, 48, 6, 0.005, seed=99)
        assert a.recovery_error == b.recovery_error
        assert a.correlation == b.correlation

    def test_omp_exact_regime_cross_checked_with_bp(self):
        omp = bp = 0
        for t in range(100):
            seed = mix_seed(5, 0, t)
            omp += run_trial("omp", 64, 32, 4, 0.0, seed, t).success
            bp += run_trial("bp", 64, 32, 4, 0.0, seed, t).success
        assert bp >= 95
        assert omp >= 95

    def test_k_above_m(self):
        with pytest.raises(ContractViolation):
            run_trial("omp", 64, 8, 9, 0.0, seed=1)

    def test_unknown_algorithm(self):
        with pytest.raises(ContractViolation):
            run_trial("lasso", 64, 32, 4, 0.0, seed=1)


class TestSweep:
    def _spec(self, **kw):
        base = dict(algorithms=("omp", "iht"), vary="k", start=2, stop=6, step=2,
                    n=64, fixed_m=32, trials=3, sigma=0.005)
        base.update(kw)
        return SweepSpec(**base)

    def test_points_inclusive(self):
        assert self._spec().points() == [(32, 2), (32, 4), (32, 6)]
        assert self._spec(vary="m", start=10, stop=30, step=10, fixed_k=3).points() == [
            (10, 3), (20, 3), (30, 3)]

    def test_contract_checked_before_work(self):
        with pytest.raises(ContractViolation):
            self._spec(stop=40)  # k = 34..40 > m = 32
        with pytest.raises(ContractViolation):
            self._spec(vary="n")

    def test_rows_order_and_count(self):
        rows = run_sweep(self._spec())
        assert [(r.k, r.algo) for r in rows] == [
            (2, "omp"), (2, "iht"), (4, "omp"), (4, "iht"), (6, "omp"), (6, "iht")]
        assert all(r.trials == 3 for r in rows)

    def test_deterministic(self):
        _, a = run_sweep(self._spec(), return_records=True)
        _, b = run_sweep(self._spec(), return_records=True)
        assert _strip_time(a) == _strip_time(b)

    def test_parallel_matches_sequential(self):
        spec = self._spec(sequential_timing=False)
        _, seq = run_sweep(spec, workers=1, return_records=True)
        _, par = run_sweep(spec, workers=2, return_records=True)
        assert _strip_time(seq) == _strip_time(par)

    def test_paired_instances(self):
        _, recs = run_sweep(self._spec(), return_records=True)
        by_trial = {}
        for r in recs:
            by_trial.setdefault((r.k, r.trial_index), set()).add(r.seed)
        assert all(len(s) == 1 for s in by_trial.values())
        assert len({r.seed for r in recs}) == 9

    def test_single_trial_aggregation_identity(self):
        spec = self._spec(start=4, stop=4, trials=1, algorithms=("omp",))
        rows, recs = run_sweep(spec, return_records=True)
        (row,), (rec,) = rows, recs
        assert row.mean_error == rec.recovery_error
        assert row.mean_time_seconds == rec.elapsed_seconds
        assert row.mean_correlation == pytest.approx(100 * rec.correlation)
        assert row.success_rate == float(rec.success)
        assert row.std_error == 0.0

    def test_aggregate_statistics(self):
        _, recs = run_sweep(self._spec(trials=4), return_records=True)
        rows = aggregate(recs, ("omp", "iht"))
        for row in rows:
            errs = [r.recovery_error for r in recs if r.algo == row.algo and r.k == row.k]
            assert row.mean_error == pytest.approx(np.mean(errs), rel=1e-12)
            assert row.std_error == pytest.approx(np.std(errs, ddof=1), rel=1e-12, abs=1e-300)


class TestPhaseDiagram:
    def test_grid_shape(self):
        spec = PhaseGridSpec(algorithms=("omp",), n=40, trials=2)
        cells = run_phase_diagram(spec)
        assert len(cells) == 100
        assert all(0.0 <= c.success_rate <= 1.0 for c in cells)
        assert {(round(c.delta, 9), round(c.rho, 9)) for c in cells} == {
            (i / 10, j / 10) for i in range(1, 11) for j in range(1, 11)}

    def test_cell_sizes_round_half_up(self):
        cells = PhaseGridSpec(algorithms=("omp",), n=256).cells()
        assert cells[0] == (0.1, 0.1, 26, 3)  # 25.6 -> 26, 2.6 -> 3
        assert cells[-1] == (1.0, 1.0, 256, 256)

    def test_overdetermined_corner(self):
        spec = PhaseGridSpec(algorithms=("omp", "bp", "laplace", "rvm"), n=64, grid_steps=10,
                             trials=5)
        cells = [c for c in run_phase_diagram(spec) if c.delta == 1.0 and c.rho == 0.1]
        assert all(c.success_rate == 1.0 for c in cells)

    def test_nearest_cells_tie_break(self):
        cells = run_phase_diagram(PhaseGridSpec(algorithms=("omp",), n=20, grid_steps=4, trials=1))
        near = nearest_cells(cells, 0.625, 0.5)
        # (0.5, 0.5) and (0.75, 0.5) tie; smaller delta first
        assert [(c.delta, c.rho) for c in near][:2] == [(0.5, 0.5), (0.75, 0.5)]
