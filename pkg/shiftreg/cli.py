from __future__ import annotations
import argparse
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import ValidationError

from . import __version__
from .bench import benchmark, compare_methods, solve_tikhonov
from .config import LOG_LEVELS, get_settings
from .errors import InputError, ShiftregError, format_validation_errors
from .operators import GeneralOperator, SymmetricOperator
from .problems import generate_problem
from .reports import emit_report, load_matrix, load_vector, save_matrix, save_vector
from .schemas import EvalRow, ExperimentConfig, FlopReport, IterationSchedule, ProblemSpec
from .shift import convergence_sweep, shift_solve_report
from .unbounded import evaluate_unbounded, evaluation_sweep
from .verify import run_invariant_suite

logger = logging.getLogger("shiftreg")

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_BAD_INPUT = 2

PROBLEM_KINDS = ["hilbert", "gauss_deconv", "second_derivative_sym", "first_derivative_rect", "rank_deficient_sym"]


def _parse_dims(text: str) -> list[int]:
    try:
        dims = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--dims must be comma-separated integers (got {text!r})") from None
    if not dims or any(d < 1 for d in dims):
        raise InputError(f"--dims needs positive integers (got {text!r})")
    return dims


def _parse_schedule(text: str) -> IterationSchedule:
    parts = text.split(",")
    if len(parts) != 2:
        raise InputError(f"--schedule must look like C,q (got {text!r})")
    try:
        coefficient, exponent = float(parts[0]), float(parts[1])
    except ValueError:
        raise InputError(f"--schedule must look like C,q (got {text!r})") from None
    return IterationSchedule(coefficient=coefficient, exponent=exponent)


def _print_vector(v: np.ndarray) -> None:
    for x in v:
        if np.iscomplexobj(v):
            print(f"{x.real:.17g},{x.imag:.17g}")
        else:
            print(f"{x:.17g}")


def cmd_solve_shift(args: argparse.Namespace) -> int:
    A = SymmetricOperator(load_matrix(args.matrix))
    f = load_vector(args.rhs)
    y = load_vector(args.exact) if args.exact else None
    report = shift_solve_report(A, f, args.a, delta=args.delta, y=y)
    summary = f"a={report.a:.6g} residual={report.residual:.6e}"
    if report.error_vs_y is not None:
        summary += f" error={report.error_vs_y:.6e} bound_eq4={report.bound_eq4:.6e}"
    if args.out:
        save_vector(args.out, report.u_delta)
        print(summary)
    else:
        _print_vector(report.u_delta)
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_solve_tikhonov(args: argparse.Namespace) -> int:
    A = GeneralOperator(load_matrix(args.matrix))
    f = load_vector(args.rhs)
    u = solve_tikhonov(A, f, args.alpha)
    summary = f"alpha={args.alpha:.6g}"
    if args.exact:
        summary += f" error={np.linalg.norm(u - load_vector(args.exact)):.6e}"
    if args.out:
        save_vector(args.out, u)
        print(summary)
    else:
        _print_vector(u)
        print(summary, file=sys.stderr)
    return EXIT_OK


def cmd_eval_unbounded(args: argparse.Namespace) -> int:
    A = GeneralOperator(load_matrix(args.matrix))
    f = load_vector(args.rhs)
    schedule = _parse_schedule(args.schedule) if args.schedule else IterationSchedule()
    target = load_vector(args.exact) if args.exact else None
    report = evaluate_unbounded(A, f, args.delta, schedule, n=args.n, target=target)
    summary = f"n_used={report.n_used} lemma1_norm={report.lemma1_norm:.6g}"
    if report.error_vs_Af is not None:
        summary += f" error={report.error_vs_Af:.6e} bound_eq9={report.bound_eq9:.6e}"
    if args.out:
        save_vector(args.out, report.v_delta)
        print(summary)
    else:
        _print_vector(report.v_delta)
        print(summary, file=sys.stderr)
    return EXIT_OK


def _load_config(path: str) -> ExperimentConfig:
    try:
        return ExperimentConfig.from_json_file(path)
    except ValidationError as exc:
        raise InputError(format_validation_errors(exc, source=path)) from None


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = args.out or config.outputs.report
    if not out:
        raise InputError("sweep needs --out or outputs.report in the config")
    problem = generate_problem(config.problem)
    exit_code = EXIT_OK

    if config.mode in ("shift", "both"):
        report = convergence_sweep(problem.operator, problem.f, config.deltas, config.shift_schedule,
                                   config.seed, y=problem.y_exact)
        emit_report(report, out)
        if report.violations:
            exit_code = EXIT_VIOLATION

    if config.mode in ("unbounded", "both"):
        rows = evaluation_sweep(problem.operator, problem.y_exact, config.deltas,
                                config.iteration_schedule, config.seed)
        if config.mode == "unbounded":
            path = out
        else:
            path = config.outputs.unbounded_report or str(Path(out).with_suffix(".unbounded.csv"))
        emit_report(rows, path, row_model=EvalRow)
        if any(not r.within_bound for r in rows):
            exit_code = EXIT_VIOLATION

    print(f"sweep complete: mode={config.mode}, rows={len(config.deltas)}, report={out}")
    return exit_code


def cmd_compare(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    out = args.out or config.outputs.report
    if not out:
        raise InputError("compare needs --out or outputs.report in the config")
    if not config.problem.is_symmetric:
        raise InputError(f"compare needs a symmetric problem kind, got {config.problem.kind}")
    problem = generate_problem(config.problem)
    report = compare_methods(problem.operator, problem.f, config.deltas, config.shift_schedule,
                             config.seed, y=problem.y_exact)
    emit_report(report.rows, out)
    print(f"compare complete: rows={len(report.rows)}, report={out}")
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    reports = benchmark(_parse_dims(args.dims), seed=args.seed, a=args.a, repeats=args.repeats)
    emit_report(reports, args.out, row_model=FlopReport)
    for r in reports:
        print(f"{r.method:>8} dim={r.dim:<5} modeled_flops={r.modeled_flops:<12} seconds={r.measured_seconds:.4e}")
    return EXIT_OK


def cmd_problem_generate(args: argparse.Namespace) -> int:
    try:
        spec = ProblemSpec(
            kind=args.kind,
            dim=args.dim,
            dim2=args.dim2,
            width=args.width,
            null_dim=args.null_dim,
            seed=args.seed,
            exact_solution=args.solution,
        )
    except ValidationError as exc:
        raise InputError(format_validation_errors(exc, source="problem")) from None
    problem = generate_problem(spec)
    save_matrix(args.out, problem.operator.entries)
    if args.rhs_out:
        save_vector(args.rhs_out, problem.f)
    if args.exact_out:
        save_vector(args.exact_out, problem.y_exact)
    rows, cols = problem.operator.shape
    print(f"Problem written: kind={spec.kind}, shape={rows}x{cols}, matrix={args.out}")
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    results = run_invariant_suite(quick=args.quick)
    for r in results:
        print(f"[{'ok' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    parser = argparse.ArgumentParser(prog="shiftreg", description="Regularized solves for ill-posed linear problems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", type=str.upper, choices=sorted(LOG_LEVELS), default=settings.log_level,
                        help="Logging level (default from SHIFTREG_LOG_LEVEL).")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-shift", help="Solve (A + ia)u = f for symmetric A.")
    p.add_argument("--matrix", required=True, help="Symmetric matrix CSV.")
    p.add_argument("--rhs", required=True, help="Right-hand side CSV.")
    p.add_argument("--a", type=float, required=True, help="Imaginary shift a > 0.")
    p.add_argument("--delta", type=float, default=0.0, help="Noise level, used for bound_eq4.")
    p.add_argument("--exact", default=None, help="Exact solution CSV; prints error and bound.")
    p.add_argument("--out", default=None, help="Output CSV (re,im per line).")
    p.set_defaults(handler=cmd_solve_shift)

    p = sub.add_parser("solve-tikhonov", help="Solve (A^T A + alpha I)u = A^T f.")
    p.add_argument("--matrix", required=True, help="Matrix CSV.")
    p.add_argument("--rhs", required=True, help="Right-hand side CSV.")
    p.add_argument("--alpha", type=float, required=True, help="Regularization weight alpha > 0.")
    p.add_argument("--exact", default=None, help="Exact solution CSV; prints the error.")
    p.add_argument("--out", default=None, help="Output CSV.")
    p.set_defaults(handler=cmd_solve_tikhonov)

    p = sub.add_parser("eval-unbounded", help="Approximate Af from noisy f by the B/F iteration.")
    p.add_argument("--matrix", required=True, help="Matrix CSV (m x n).")
    p.add_argument("--rhs", required=True, help="Noisy data f_delta CSV (length n).")
    p.add_argument("--delta", type=float, required=True, help="Noise level.")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--n", type=int, default=None, help="Explicit iteration count.")
    group.add_argument("--schedule", default=None, help="C,q for n(delta) = ceil(C delta^-q).")
    p.add_argument("--exact", default=None, help="Exact Af CSV; prints error and bound.")
    p.add_argument("--out", default=None, help="Output CSV.")
    p.set_defaults(handler=cmd_eval_unbounded)

    p = sub.add_parser("sweep", help="Delta sweep from a JSON experiment config.")
    p.add_argument("--config", required=True, help="Experiment JSON.")
    p.add_argument("--out", default=None, help="Report CSV.")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("compare", help="Shift vs Tikhonov comparison from a JSON config.")
    p.add_argument("--config", required=True, help="Experiment JSON.")
    p.add_argument("--out", default=None, help="Report CSV.")
    p.set_defaults(handler=cmd_compare)

    p = sub.add_parser("bench", help="Modeled operation counts and timings.")
    p.add_argument("--dims", default="64,128,256,512", help="Comma-separated sizes.")
    p.add_argument("--out", required=True, help="Benchmark CSV.")
    p.add_argument("--seed", type=int, default=0, help="Seed for the right-hand side.")
    p.add_argument("--a", type=float, default=1e-3, help="Shift a (alpha = a^2).")
    p.add_argument("--repeats", type=int, default=3, help="Timing repeats; best is kept.")
    p.set_defaults(handler=cmd_bench)

    p = sub.add_parser("problem", help="Test-problem utilities.")
    problem_sub = p.add_subparsers(dest="problem_command", required=True)
    g = problem_sub.add_parser("generate", help="Write a canonical test problem.")
    g.add_argument("--kind", required=True, choices=PROBLEM_KINDS, help="Operator family.")
    g.add_argument("--dim", type=int, required=True, help="Operator size.")
    g.add_argument("--dim2", type=int, default=None, help="Columns (first_derivative_rect: dim + 1).")
    g.add_argument("--width", type=float, default=3.0, help="Kernel width for gauss_deconv.")
    g.add_argument("--null-dim", type=int, default=1, help="Null-space dimension for rank_deficient_sym.")
    g.add_argument("--seed", type=int, default=0, help="Seed for rank_deficient_sym.")
    g.add_argument("--solution", choices=["ones", "smooth_sine"], default="smooth_sine", help="Exact solution.")
    g.add_argument("--out", required=True, help="Matrix CSV.")
    g.add_argument("--rhs-out", default=None, help="Write f = A y here.")
    g.add_argument("--exact-out", default=None, help="Write y here.")
    g.set_defaults(handler=cmd_problem_generate)

    p = sub.add_parser("verify", help="Run the invariant suite; exit 0 iff all checks pass.")
    p.add_argument("--quick", action="store_true", help="Reduced grids.")
    p.set_defaults(handler=cmd_verify)
    return parser


def run_cli(argv: Optional[list[str]] = None) -> int:
    """
    CLI entrypoint: python -m shiftreg <command> [options]

    Exit codes: 0 success, 1 invariant/bound violation or I/O failure, 2 bad input.
    """
    try:
        parser = build_parser()
        args = parser.parse_args(argv)
    except ValidationError as exc:
        print(f"error: {format_validation_errors(exc, source='environment')}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ValueError as exc:
        print(f"error: bad SHIFTREG_* setting: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except SystemExit as exc:
        return int(exc.code or 0)

    logging.basicConfig(level=str(args.log_level).upper(), format="%(levelname)s %(name)s: %(message)s")
    logger.debug("running command %s", args.command)

    try:
        return args.handler(args)
    except ValidationError as exc:
        print(f"error: {format_validation_errors(exc, source=args.command)}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ShiftregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
