"""Invariant suite behind `shiftreg verify`."""
from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from pydantic import BaseModel

from .bench import condition_numbers, flop_model, solve_tikhonov, tikhonov_spectral
from .errors import ShiftregError
from .operators import GeneralOperator, SymmetricOperator, eigendecompose, make_noisy
from .problems import generate_problem
from .schemas import IterationSchedule, ProblemSpec, ShiftSchedule
from .shift import bound_eq4, schedule_a, solve_shift, solve_shift_spectral, spectral_remainder_eq5
from .unbounded import (
    bound_eq9_curve,
    build_operators,
    iteration_history,
    schedule_n,
    verify_lemma1,
)

logger = logging.getLogger(__name__)


class CheckResult(BaseModel):
    name: str
    passed: bool
    detail: str = ""


def _lemma1_operators(quick: bool) -> list[GeneralOperator]:
    sizes = (4, 8) if quick else tuple(range(4, 13))
    ops = [GeneralOperator(generate_problem(ProblemSpec(kind="hilbert", dim=n)).operator.entries) for n in sizes]
    if not quick:
        for kind in ("gauss_deconv", "second_derivative_sym", "first_derivative_rect"):
            ops.append(GeneralOperator(generate_problem(ProblemSpec(kind=kind, dim=64)).operator.entries))
    ops.append(GeneralOperator(generate_problem(ProblemSpec(kind="rank_deficient_sym", dim=8, null_dim=2)).operator.entries))
    rng = np.random.default_rng(2024)
    for _ in range(5 if quick else 50):
        ops.append(GeneralOperator(rng.standard_normal((8, 8))))
    return ops


def check_lemma1(quick: bool = False) -> CheckResult:
    worst = 0.0
    for A in _lemma1_operators(quick):
        worst = max(worst, verify_lemma1(build_operators(A), strict=True))
    # singular value exactly 1 attains the maximum of s/(1+s^2)
    attained = verify_lemma1(build_operators(GeneralOperator(np.diag([1.0, 3.0]))))
    ok = abs(attained - 0.5) <= 1e-8
    return CheckResult(name="lemma1", passed=ok,
                       detail=f"max ||F|| = {worst:.15f}, ||F|| at sigma=1: {attained:.15f}")


def check_condition_identity(quick: bool = False) -> CheckResult:
    worst = 0.0
    for n in ((8,) if quick else (8, 10, 12)):
        decomp = eigendecompose(SymmetricOperator(generate_problem(ProblemSpec(kind="hilbert", dim=n)).operator.entries))
        for a in (1e-2, 1e-4, 1e-6):
            cond = condition_numbers(decomp, a)
            worst = max(worst, abs(cond.kappa_shift - np.sqrt(cond.kappa_normal)) / cond.kappa_shift)
    return CheckResult(name="condition_identity", passed=worst <= 1e-8, detail=f"max relative gap {worst:.3e}")


def check_resolvent_oracle(quick: bool = False) -> CheckResult:
    worst = 0.0
    for kind, dim in (("hilbert", 6), ("second_derivative_sym", 16), ("rank_deficient_sym", 8)):
        problem = generate_problem(ProblemSpec(kind=kind, dim=dim, null_dim=2))
        decomp = eigendecompose(problem.operator)
        f = make_noisy(problem.f, 1e-3, 7).f_delta
        for a in (1e-1, 1e-3):
            direct = solve_shift(problem.operator, f, a)
            spectral = solve_shift_spectral(decomp, f, a)
            worst = max(worst, np.linalg.norm(direct - spectral) / np.linalg.norm(direct))
        # the normal equations square the conditioning; keep alpha moderate
        tik = solve_tikhonov(problem.operator, f, 1e-2)
        tik_spec = tikhonov_spectral(decomp, f, 1e-2)
        worst = max(worst, np.linalg.norm(tik - tik_spec) / np.linalg.norm(tik))
    return CheckResult(name="resolvent_oracle", passed=worst <= 1e-10, detail=f"max relative gap {worst:.3e}")


def check_bound_eq4(quick: bool = False) -> CheckResult:
    schedule = ShiftSchedule()
    violations = 0
    checks = 0
    kinds = (("hilbert", 10),) if quick else (("hilbert", 10), ("gauss_deconv", 64))
    for kind, dim in kinds:
        problem = generate_problem(ProblemSpec(kind=kind, dim=dim))
        decomp = eigendecompose(problem.operator)
        tol = 1e-10 * (1 + np.linalg.norm(problem.y_exact))
        for delta in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7):
            a = schedule_a(schedule, delta)
            bound = bound_eq4(decomp, problem.y_exact, a, delta)
            for seed in range(3 if quick else 20):
                f_delta = make_noisy(problem.f, delta, seed).f_delta
                error = np.linalg.norm(solve_shift(problem.operator, f_delta, a) - problem.y_exact)
                checks += 1
                violations += int(error > bound + tol)
    return CheckResult(name="bound_eq4", passed=violations == 0, detail=f"{violations} violations in {checks} solves")


def check_eq5_limit(quick: bool = False) -> CheckResult:
    problem = generate_problem(ProblemSpec(kind="hilbert", dim=6, exact_solution="ones"))
    decomp = eigendecompose(problem.operator)
    # y = A w lies in the range, hence orthogonal to the null space
    y = problem.f
    values = [spectral_remainder_eq5(decomp, y, 10.0 ** -k) for k in range(1, 9)]
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    small = values[-1] < 1e-8 * float(np.dot(y, y))
    return CheckResult(name="eq5_limit", passed=monotone and small,
                       detail=f"remainder at a=1e-8: {values[-1]:.3e}")


def check_bound_eq9(quick: bool = False) -> CheckResult:
    schedule = IterationSchedule()
    problem = generate_problem(ProblemSpec(kind="first_derivative_rect", dim=64))
    # (operator, y, noise seeds)
    cases = [(problem.operator, problem.y_exact, 2 if quick else 10)]
    rng = np.random.default_rng(99)
    for _ in range(5 if quick else 20):
        cases.append((GeneralOperator(rng.standard_normal((8, 8))), rng.standard_normal(8), 2))

    violations = 0
    deltas = (1e-2, 1e-4) if quick else (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    for A, y, seeds in cases:
        ops = build_operators(A)
        target = A.entries @ y
        tol = 1e-8 * (1 + np.linalg.norm(target))
        for delta in deltas:
            n_max = 10 * schedule_n(schedule, delta)
            bounds = bound_eq9_curve(ops, -target, n_max, delta)
            for seed in range(seeds):
                f_delta = make_noisy(y, delta, seed).f_delta
                errors = iteration_history(ops, f_delta, n_max, target)
                violations += int(np.count_nonzero(errors[1:] > bounds[1:] + tol))
    return CheckResult(name="bound_eq9", passed=violations == 0,
                       detail=f"{violations} violations over {len(cases)} operators")


def check_flop_model(quick: bool = False) -> CheckResult:
    dims = (64, 128, 256, 512, 1024, 2000)
    ok = all(flop_model("tikhonov", n) > flop_model("shift", n) for n in dims)
    return CheckResult(name="flop_model", passed=ok, detail="tikhonov > shift for dim >= 64" if ok else "ordering broken")


CHECKS: list[Callable[[bool], CheckResult]] = [
    check_lemma1,
    check_condition_identity,
    check_resolvent_oracle,
    check_bound_eq4,
    check_eq5_limit,
    check_bound_eq9,
    check_flop_model,
]


def run_invariant_suite(quick: bool = False) -> list[CheckResult]:
    results: list[CheckResult] = []
    for check in CHECKS:
        try:
            result = check(quick)
        except ShiftregError as exc:
            result = CheckResult(name=check.__name__.removeprefix("check_"), passed=False, detail=str(exc))
        logger.info("%s: %s (%s)", result.name, "ok" if result.passed else "FAILED", result.detail)
        results.append(result)
    return results
