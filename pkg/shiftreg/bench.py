"""Tikhonov baseline, condition numbers and operation-count model.

Flop model stage list (n = dim, w = complex_weight, counts are integers):

  shift (A + iaI)u = f, complex LU:
    assemble   n                       add ia on the diagonal
    factor_lu  w * (4n^3 - 3n^2 + 5n)/6  getrf
    solve_lu   w * (2n^2 - n)            two triangular solves

  tikhonov (A^T A + alpha I)u = A^T f, real Cholesky:
    gram            n^2 (2n - 1)         A^T A as a dense product
    assemble        n                    add alpha on the diagonal
    rhs             n (2n - 1)           A^T f
    factor_cholesky n(n + 1)(2n + 1)/6   potrf
    solve_cholesky  2n^2 - n             two triangular solves

w = 1 counts operations in the working field (one complex multiply = one
operation); w = 4 approximates real flops for the complex stages.
"""
from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import scipy.linalg
from pydantic import ValidationError

from .config import THREAD_ENV_VARS
from .errors import InputError, SolverError, format_validation_errors
from .operators import (
    Operator,
    SpectralDecomposition,
    SymmetricOperator,
    as_array,
    as_vector,
    check_length,
    eigendecompose,
    make_noisy,
    minimal_norm_solution,
)
from .schemas import ComparisonRow, CondReport, FlopReport, ShiftSchedule, TikhonovParameters
from .shift import schedule_a, solve_shift

logger = logging.getLogger(__name__)

Method = Literal["shift", "tikhonov"]
METHODS = ("shift", "tikhonov")


@dataclass(frozen=True)
class ComparisonReport:
    rows: list[ComparisonRow]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _check_alpha(alpha: float) -> float:
    try:
        return TikhonovParameters(alpha=alpha).alpha
    except ValidationError as exc:
        raise InputError(format_validation_errors(exc, source="tikhonov")) from None


def solve_tikhonov(A: Operator, f_delta, alpha: float) -> np.ndarray:
    """Solve (A^T A + alpha I)u = A^T f_delta by Cholesky."""
    alpha = _check_alpha(alpha)
    arr = as_array(A)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, arr.shape[0], "f_delta")
    M = arr.T @ arr + alpha * np.eye(arr.shape[1])
    try:
        factor = scipy.linalg.cho_factor(M, lower=True)
        return scipy.linalg.cho_solve(factor, arr.T @ f_delta)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Cholesky of A^T A + alpha I failed: {exc}", dim=arr.shape[1],
                          norm=float(np.linalg.norm(arr))) from exc


def tikhonov_spectral(decomp: SpectralDecomposition, f_delta, alpha: float) -> np.ndarray:
    """sum_k lambda_k <f_delta, v_k>/(lambda_k^2 + alpha) v_k."""
    alpha = _check_alpha(alpha)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, decomp.source_dim, "f_delta")
    lam = decomp.eigenvalues
    return decomp.synthesize(lam * decomp.coefficients(f_delta) / (lam ** 2 + alpha))


def condition_numbers(decomp: SpectralDecomposition, a: float) -> CondReport:
    """kappa_2(A + iaI) and kappa_2(A^T A + a^2 I) from the eigenvalues of A."""
    if not a > 0:
        raise InputError(f"a must be > 0 (got {a})")
    shifted = decomp.eigenvalues ** 2 + a * a
    kappa_normal = float(np.max(shifted) / np.min(shifted))
    kappa_shift = float(np.sqrt(np.max(shifted)) / np.sqrt(np.min(shifted)))
    return CondReport(
        a=float(a),
        kappa_shift=kappa_shift,
        kappa_normal=kappa_normal,
        ratio_check=kappa_shift / np.sqrt(kappa_normal),
    )


def flop_stages(method: Method, dim: int, complex_weight: int = 1) -> dict[str, int]:
    """Per-stage operation counts; see the module docstring."""
    if method not in METHODS:
        raise InputError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    if dim < 1:
        raise InputError(f"dim must be >= 1 (got {dim})")
    if complex_weight < 1:
        raise InputError(f"complex_weight must be >= 1 (got {complex_weight})")
    n = int(dim)
    if method == "shift":
        return {
            "assemble": n,
            "factor_lu": complex_weight * ((4 * n ** 3 - 3 * n ** 2 + 5 * n) // 6),
            "solve_lu": complex_weight * (2 * n ** 2 - n),
        }
    return {
        "gram": n ** 2 * (2 * n - 1),
        "assemble": n,
        "rhs": n * (2 * n - 1),
        "factor_cholesky": n * (n + 1) * (2 * n + 1) // 6,
        "solve_cholesky": 2 * n ** 2 - n,
    }


def flop_model(method: Method, dim: int, complex_weight: int = 1) -> int:
    return sum(flop_stages(method, dim, complex_weight).values())


def compare_methods(
    A: SymmetricOperator,
    f,
    deltas: Sequence[float],
    shift_schedule: ShiftSchedule,
    seed: int,
    y=None,
    *,
    a_at_zero: Optional[float] = None,
) -> ComparisonReport:
    """
    Shift (a = a(delta)) against Tikhonov (alpha = a(delta)^2) on the same noisy data.
    Rows sorted by descending delta; a delta of 0 uses `a_at_zero`.
    """
    f = as_vector(f, "f")
    check_length(f, A.dim, "f")
    y = minimal_norm_solution(A, f).y if y is None else as_vector(y, "y")
    decomp = eigendecompose(A)
    shift_flops = flop_model("shift", A.dim)
    tikhonov_flops = flop_model("tikhonov", A.dim)

    rows: list[ComparisonRow] = []
    for row_index, delta in enumerate(sorted((float(d) for d in deltas), reverse=True)):
        noisy = make_noisy(f, delta, seed, stream=row_index)
        if delta == 0:
            if a_at_zero is None:
                raise InputError("a delta of 0 needs an explicit a_at_zero")
            a = float(a_at_zero)
        else:
            a = schedule_a(shift_schedule, delta)
        alpha = a * a
        u_shift = solve_shift(A, noisy.f_delta, a)
        u_tik = solve_tikhonov(A, noisy.f_delta, alpha)
        cond = condition_numbers(decomp, a)
        rows.append(
            ComparisonRow(
                delta=delta,
                a=a,
                alpha=alpha,
                shift_error=float(np.linalg.norm(u_shift - y)),
                tikhonov_error=float(np.linalg.norm(u_tik - y)),
                kappa_shift=cond.kappa_shift,
                kappa_normal=cond.kappa_normal,
                ratio_check=cond.ratio_check,
                shift_flops=shift_flops,
                tikhonov_flops=tikhonov_flops,
            )
        )
        logger.info("compare: delta=%.3e shift=%.6e tikhonov=%.6e", delta,
                    rows[-1].shift_error, rows[-1].tikhonov_error)
    return ComparisonReport(rows=rows)


def benchmark(
    dims: Sequence[int],
    seed: int = 0,
    a: float = 1e-3,
    repeats: int = 3,
    operator_factory=None,
) -> list[FlopReport]:
    """
    Time both solvers per dim (best of `repeats`) next to their modeled counts.
    Timings are reported only; no ordering between methods is asserted.

    BLAS reads its thread count once at import, so sequential kernels need
    SHIFTREG_NUM_THREADS=1 (or the BLAS variables) set before the process starts.
    A warning is logged when any of them is missing or above 1.
    """
    if repeats < 1:
        raise InputError(f"repeats must be >= 1 (got {repeats})")
    thread_caps = {name: os.environ.get(name) for name in THREAD_ENV_VARS}
    if any(value != "1" for value in thread_caps.values()):
        logger.warning("bench timings are not pinned to sequential kernels (%s); "
                       "set SHIFTREG_NUM_THREADS=1 before starting",
                       ", ".join(f"{k}={v}" for k, v in thread_caps.items()))
    operator_factory = operator_factory or (lambda n: SymmetricOperator(scipy.linalg.hilbert(n)))
    reports: list[FlopReport] = []
    for dim in dims:
        A = operator_factory(int(dim))
        f = make_noisy(np.zeros(A.dim), 1.0, seed).f_delta
        cond = condition_numbers(eigendecompose(A), a)
        solvers = {
            "shift": (lambda: solve_shift(A, f, a), cond.kappa_shift),
            "tikhonov": (lambda: solve_tikhonov(A, f, a * a), cond.kappa_normal),
        }
        for method, (solve, kappa) in solvers.items():
            best = np.inf
            for _ in range(repeats):
                start = time.perf_counter()
                solve()
                best = min(best, time.perf_counter() - start)
            reports.append(
                FlopReport(
                    method=method,
                    dim=A.dim,
                    modeled_flops=flop_model(method, A.dim),
                    measured_seconds=float(best),
                    kappa=kappa,
                )
            )
            logger.info("bench: %s dim=%d %.3es", method, A.dim, best)
    return reports
