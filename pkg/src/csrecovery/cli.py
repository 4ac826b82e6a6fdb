"""Command-line front end: ``solve``, ``sweep``, ``phase`` and ``selftest``.

Exit status is 0 on success, 1 on a runtime or I/O failure and 2 on a usage
error (bad flag, unparsable number, violated bound).
"""

import argparse
import logging
import os
import sys

import numpy as np

from .bench import (
    DEFAULT_AMPLITUDE,
    PhaseGridSpec,
    SweepError,
    SweepSpec,
    run_phase_diagram,
    run_sweep,
    run_trial,
    theoretical_rho,
)
from .exceptions import ContractViolation
from .metrics import DEFAULT_SUCCESS_THRESHOLD
from .problem import AMPLITUDE_MODELS, MATRIX_KINDS
from .reporting import render_line_plot, render_phase_heatmap, write_csv
from .rng import mix_seed
from .solvers import ALGORITHMS

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

# per-subcommand defaults for flags shared by all subcommands
_DEFAULTS = {
    "solve": {"n": 1024, "sigma": 0.005, "trials": 1},
    "sweep": {"n": 1024, "sigma": 0.005, "trials": 100},
    "phase": {"n": 256, "sigma": 0.0, "trials": 20},
    "selftest": {"n": 64, "sigma": 0.0, "trials": 5},
}
_SWEEP_RANGES = {"m": "50:250:10", "k": "10:150:10"}
_PLOT_METRICS = {"error": "mean_error", "time": "mean_time_seconds", "correlation": "mean_correlation"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v >= 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a finite number >= 0, got {text}")
    return v


def _seed(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in 64 bits, got {v}")
    return v


def _range(text):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:step, got {text!r}")
    try:
        start, stop, step = (int(p) for p in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(f"range bounds must be integers, got {text!r}") from None
    if step < 1:
        raise argparse.ArgumentTypeError(f"range step must be >= 1 in {text!r}")
    if stop < start:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    return start, stop, step


def _algo_list(text):
    algos = [a.strip() for a in text.split(",") if a.strip()]
    bad = [a for a in algos if a not in ALGORITHMS]
    if not algos or bad:
        raise argparse.ArgumentTypeError(
            f"unknown algorithm {bad[0] if bad else text!r}; choose from {','.join(ALGORITHMS)}"
        )
    return tuple(dict.fromkeys(algos))


def _common(p):
    p.add_argument("--n", type=_positive_int, help="signal length N")
    p.add_argument("--m", type=_positive_int, help="number of measurements M")
    p.add_argument("--k", type=_positive_int, help="sparsity level K")
    p.add_argument("--sigma", type=_nonneg_float, help="noise standard deviation")
    p.add_argument("--seed", type=_seed, default=42, help="base seed (default 42)")
    p.add_argument("--trials", type=_positive_int, help="Monte Carlo trials per point")
    p.add_argument("--algos", type=_algo_list, default=ALGORITHMS,
                   help=f"comma list from {{{','.join(ALGORITHMS)}}}")
    p.add_argument("--matrix", choices=MATRIX_KINDS, default="toeplitz")
    p.add_argument("--amp", choices=AMPLITUDE_MODELS, default=DEFAULT_AMPLITUDE,
                   help=f"spike amplitude model (default {DEFAULT_AMPLITUDE})")
    p.add_argument("--normalize-columns", action="store_true",
                   help="scale sensing-matrix columns to unit norm")
    p.add_argument("--threshold", type=_nonneg_float, default=DEFAULT_SUCCESS_THRESHOLD,
                   help="success threshold on the recovery error (default 0.01)")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--plot", help="SVG output path")
    p.add_argument("--no-parallel", action="store_true", help="run trials in this process only")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="csrecovery", description="Compressive-sensing recovery benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one random instance")
    _common(p)
    p.add_argument("--algo", choices=ALGORITHMS, help="single algorithm (overrides --algos)")

    p = sub.add_parser("sweep", help="error/time/correlation sweep over M or K")
    _common(p)
    p.add_argument("--vary", choices=("m", "k"), default="k")
    p.add_argument("--m-range", type=_range, help="start:stop:step for M (inclusive)")
    p.add_argument("--k-range", type=_range, help="start:stop:step for K (inclusive)")
    p.add_argument("--trials-out", help="also write every trial to this CSV")
    p.add_argument("--plot-metric", choices=tuple(_PLOT_METRICS), default="error")
    p.add_argument("--no-sequential-timing", action="store_true",
                   help="allow parallel trials even though timings become contended")

    p = sub.add_parser("phase", help="success-rate phase diagram over (delta, rho)")
    _common(p)
    p.add_argument("--grid", type=_positive_int, default=10, help="grid steps per axis")
    p.add_argument("--overlay-theory", action="store_true")

    p = sub.add_parser("selftest", help="quick end-to-end sanity checks")
    _common(p)
    return parser


def parse_cli(argv):
    """Parse and validate ``argv``; raises :class:`UsageError` on bad input."""
    args = build_parser().parse_args(argv)
    for key, value in _DEFAULTS[args.command].items():
        if getattr(args, key) is None:
            setattr(args, key, value)
    if args.command == "solve":
        if args.algo:
            args.algos = (args.algo,)
        args.m = args.m if args.m is not None else 200
        args.k = args.k if args.k is not None else 50
        if not args.k <= args.m <= args.n:
            raise UsageError(f"need k <= m <= n, got n={args.n}, m={args.m}, k={args.k}")
    elif args.command == "sweep":
        other = "k" if args.vary == "m" else "m"
        if getattr(args, f"{other}_range") is not None:
            raise UsageError(f"--{other}-range given but --vary is {args.vary}")
        rng = getattr(args, f"{args.vary}_range") or _range(_SWEEP_RANGES[args.vary])
        try:
            args.spec = SweepSpec(
                algorithms=args.algos,
                vary=args.vary,
                start=rng[0],
                stop=rng[1],
                step=rng[2],
                n=args.n,
                fixed_m=args.m if args.m is not None else 200,
                fixed_k=args.k if args.k is not None else 50,
                sigma=args.sigma,
                trials=args.trials,
                base_seed=args.seed,
                matrix_kind=args.matrix,
                amplitude_model=args.amp,
                normalize_columns=args.normalize_columns,
                success_threshold=args.threshold,
                sequential_timing=not args.no_sequential_timing,
            )
        except ContractViolation as exc:
            raise UsageError(str(exc)) from None
    elif args.command == "phase":
        if args.m is not None or args.k is not None:
            raise UsageError("phase does not take --m/--k; the grid sets them")
        try:
            args.spec = PhaseGridSpec(
                algorithms=args.algos,
                n=args.n,
                grid_steps=args.grid,
                trials=args.trials,
                base_seed=args.seed,
                sigma=args.sigma,
                matrix_kind=args.matrix,
                amplitude_model=args.amp,
                normalize_columns=args.normalize_columns,
                success_threshold=args.threshold,
            )
        except ContractViolation as exc:
            raise UsageError(str(exc)) from None
    return args


def _workers(args):
    return 1 if args.no_parallel else (os.cpu_count() or 1)


def _cmd_solve(args):
    records = []
    for algo in args.algos:
        rec = run_trial(algo, args.n, args.m, args.k, args.sigma, args.seed,
                        matrix_kind=args.matrix, amplitude_model=args.amp,
                        normalize_columns=args.normalize_columns,
                        success_threshold=args.threshold)
        records.append(rec)
        print(f"{algo:8s} error={rec.recovery_error:.6g} correlation={rec.correlation:.6g} "
              f"time={rec.elapsed_seconds:.4g}s success={rec.success} converged={rec.converged}")
    if args.out:
        write_csv(records, "trial", args.out)
    return EXIT_OK


def _cmd_sweep(args):
    spec = args.spec
    try:
        rows, records = run_sweep(spec, workers=_workers(args), return_records=True)
    except SweepError as exc:
        if args.out:
            partial = f"{args.out}.partial.csv"
            write_csv(exc.records, "trial", partial)
            print(f"partial results ({len(exc.records)} trials) written to {partial}", file=sys.stderr)
        raise
    for row in rows:
        print(f"{row.algo:8s} m={row.m:<5d} k={row.k:<5d} error={row.mean_error:.4g} "
              f"time={row.mean_time_seconds:.4g}s corr={row.mean_correlation:.4g}% "
              f"success={row.success_rate:.3g}")
    if args.out:
        write_csv(rows, "sweep", args.out)
    if args.trials_out:
        write_csv(records, "trial", args.trials_out)
    if args.plot:
        render_line_plot(rows, spec.vary, _PLOT_METRICS[args.plot_metric], args.plot)
    return EXIT_OK


def _cmd_phase(args):
    cells = run_phase_diagram(args.spec, workers=_workers(args))
    for algo in args.spec.algorithms:
        mine = [c for c in cells if c.algo == algo]
        good = sum(c.success_rate >= 0.5 for c in mine)
        print(f"{algo:8s} cells with success >= 0.5: {good}/{len(mine)}")
    if args.out:
        write_csv(cells, "phase", args.out)
    if args.plot:
        render_phase_heatmap(cells, args.overlay_theory, args.plot)
    return EXIT_OK


def _cmd_selftest(args):
    """Exact recovery on small noiseless instances plus a few fixed values."""
    checks = []
    rho = theoretical_rho(0.1)
    checks.append(("theoretical_rho(0.1)", abs(rho - 0.217147) <= 1e-5, f"{rho:.6f}"))
    n, m, k = args.n, max(2, args.n // 2), max(1, args.n // 16)
    for algo in args.algos:
        errors = []
        for t in range(args.trials):
            rec = run_trial(algo, n, m, k, 0.0, mix_seed(args.seed, t), trial_index=t,
                            matrix_kind=args.matrix, amplitude_model=args.amp,
                            normalize_columns=args.normalize_columns)
            errors.append(rec.recovery_error)
        med = float(np.median(errors))
        checks.append((f"{algo} median error n={n} m={m} k={k}", med <= 1e-3, f"{med:.3g}"))
    a = run_trial("omp", n, m, k, 0.0, args.seed)
    b = run_trial("omp", n, m, k, 0.0, args.seed)
    checks.append(("determinism", a.recovery_error == b.recovery_error, "bit-identical"))
    ok = True
    for name, passed, detail in checks:
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return EXIT_OK if ok else EXIT_RUNTIME


_COMMANDS = {"solve": _cmd_solve, "sweep": _cmd_sweep, "phase": _cmd_phase, "selftest": _cmd_selftest}


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_cli(argv)
    except UsageError as exc:
        build_parser().print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ContractViolation as exc:
        print(f"csrecovery: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, RuntimeError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"csrecovery: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
