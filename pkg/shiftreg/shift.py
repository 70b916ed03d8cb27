"""Complex-shift regularization: solve (A + ia)u = f_delta for symmetric A.

With a = a(delta) -> 0 and delta/a(delta) -> 0 the solution converges to the
minimal-norm solution y of Au = f. The error obeys

    ||u - y|| <= delta/a + a ||(A + ia)^-1 y||.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .config import get_settings
from .errors import InputError, InvariantViolation, SolverError
from .operators import (
    SpectralDecomposition,
    SymmetricOperator,
    as_vector,
    check_length,
    eigendecompose,
    make_noisy,
    minimal_norm_solution,
)
from .schemas import ConvergenceRow, ShiftSchedule

logger = logging.getLogger(__name__)

BOUND_ATOL = 1e-10


@dataclass(frozen=True)
class ShiftSolveReport:
    u_delta: np.ndarray
    a: float
    delta: float
    error_vs_y: Optional[float]
    bound_eq4: Optional[float]
    residual: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Rows (delta, a, error, bound_eq4, residual), sorted by descending delta."""
    rows: list[ConvergenceRow]

    @property
    def violations(self) -> list[ConvergenceRow]:
        return [r for r in self.rows if not r.within_bound]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)


def _check_shift(a: float) -> float:
    if not a > 0:
        raise InputError(f"shift a must be > 0 (got {a}); (A + ia)u = f may be singular otherwise")
    return float(a)


def solve_shift(A: SymmetricOperator, f_delta, a: float) -> np.ndarray:
    """Direct complex solve of (A + iaI)u = f_delta."""
    a = _check_shift(a)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, A.dim, "f_delta")
    M = A.entries + 1j * a * np.eye(A.dim)
    try:
        return scipy.linalg.solve(M, f_delta.astype(complex))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"complex shifted solve failed: {exc}", dim=A.dim,
                          norm=float(np.linalg.norm(A.entries))) from exc


def solve_shift_spectral(decomp: SpectralDecomposition, f_delta, a: float) -> np.ndarray:
    """sum_k <f_delta, v_k>/(lambda_k + ia) v_k."""
    a = _check_shift(a)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, decomp.source_dim, "f_delta")
    return decomp.synthesize(decomp.coefficients(f_delta) / (decomp.eigenvalues + 1j * a))


def resolvent_norm(decomp: SpectralDecomposition, a: float) -> float:
    """||(A + iaI)^-1||_2 = 1/min_k sqrt(lambda_k^2 + a^2), never above 1/a."""
    a = _check_shift(a)
    return float(1.0 / np.sqrt(np.min(decomp.eigenvalues ** 2 + a * a)))


def _weighted_resolvent_norm(decomp: SpectralDecomposition, x: np.ndarray, a: float) -> float:
    # ||(A + ia)^-1 x|| from eigen-coefficients
    c = decomp.coefficients(x)
    return float(np.sqrt(np.sum(np.abs(c) ** 2 / (decomp.eigenvalues ** 2 + a * a))))


def bound_eq4(decomp: SpectralDecomposition, y, a: float, delta: float) -> float:
    """delta/a + a ||(A + iaI)^-1 y||."""
    a = _check_shift(a)
    if delta < 0:
        raise InputError(f"delta must be >= 0 (got {delta})")
    y = as_vector(y, "y")
    check_length(y, decomp.source_dim, "y")
    return float(delta / a + a * _weighted_resolvent_norm(decomp, y, a))


def spectral_remainder_eq5(
    decomp: SpectralDecomposition, y, a: float, rank_tolerance: Optional[float] = None
) -> float:
    """a^2 sum_{|lambda_k| > tol} |<y, v_k>|^2 / (lambda_k^2 + a^2).

    Components of y in the numerical null space are projected out first.
    """
    a = _check_shift(a)
    y = as_vector(y, "y")
    check_length(y, decomp.source_dim, "y")
    lam = decomp.eigenvalues
    if rank_tolerance is None:
        rank_tolerance = np.finfo(float).eps * decomp.source_dim * decomp.max_abs_eigenvalue
    keep = np.abs(lam) > rank_tolerance
    c = decomp.coefficients(y)[keep]
    return float(a * a * np.sum(np.abs(c) ** 2 / (lam[keep] ** 2 + a * a)))


def shift_error_split(decomp: SpectralDecomposition, f, f_delta, y, a: float) -> tuple[float, float]:
    """(noise, bias) = (||(A+ia)^-1 (f_delta - f)||, ||(A+ia)^-1 Ay - y||).

    noise <= delta/a; bias = a ||(A+ia)^-1 y||.
    """
    a = _check_shift(a)
    f = as_vector(f, "f")
    f_delta = as_vector(f_delta, "f_delta")
    y = as_vector(y, "y")
    for vec, name in ((f, "f"), (f_delta, "f_delta"), (y, "y")):
        check_length(vec, decomp.source_dim, name)
    noise = _weighted_resolvent_norm(decomp, f_delta - f, a)
    bias = a * _weighted_resolvent_norm(decomp, y, a)
    return noise, float(bias)


def schedule_a(schedule: ShiftSchedule, delta: float) -> float:
    """a(delta) = C * delta**p."""
    if not delta > 0:
        raise InputError(f"delta must be > 0 to evaluate a(delta) (got {delta})")
    return float(schedule.coefficient * delta ** schedule.exponent)


def shift_residual(A: SymmetricOperator, u: np.ndarray, f_delta: np.ndarray, a: float) -> float:
    return float(np.linalg.norm(A.entries @ u + 1j * a * u - f_delta))


def shift_solve_report(
    A: SymmetricOperator,
    f_delta,
    a: float,
    delta: float = 0.0,
    y=None,
    decomp: Optional[SpectralDecomposition] = None,
) -> ShiftSolveReport:
    """Solve once and collect the residual and, when y is known, the error and its bound."""
    f_delta = as_vector(f_delta, "f_delta")
    u = solve_shift(A, f_delta, a)
    error = bound = None
    if y is not None:
        y = as_vector(y, "y")
        check_length(y, A.dim, "y")
        decomp = decomp or eigendecompose(A)
        error = float(np.linalg.norm(u - y))
        bound = bound_eq4(decomp, y, a, delta)
    return ShiftSolveReport(
        u_delta=u,
        a=float(a),
        delta=float(delta),
        error_vs_y=error,
        bound_eq4=bound,
        residual=shift_residual(A, u, f_delta, a),
    )


def convergence_sweep(
    A: SymmetricOperator,
    f,
    deltas: Sequence[float],
    schedule: ShiftSchedule,
    seed: int,
    y=None,
    *,
    a_at_zero: Optional[float] = None,
    workers: Optional[int] = None,
    strict: bool = False,
) -> ConvergenceReport:
    """
    One row per delta, descending: f_delta = make_noisy(f, delta, seed, row),
    a = a(delta), u = solve_shift. A delta of 0 needs an explicit `a_at_zero`.

    Rows whose error exceeds bound_eq4 are flagged (and raise when strict).
    """
    f = as_vector(f, "f")
    check_length(f, A.dim, "f")
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if any(d < 0 for d in deltas):
        raise InputError("deltas must be >= 0")
    if 0.0 in deltas and a_at_zero is None:
        raise InputError("a delta of 0 needs an explicit a_at_zero; a(0) = 0 is not allowed")

    decomp = eigendecompose(A)
    y = minimal_norm_solution(A, f).y if y is None else as_vector(y, "y")
    check_length(y, A.dim, "y")
    tol = BOUND_ATOL * (1.0 + np.linalg.norm(y))

    def evaluate_row(item: tuple[int, float]) -> ConvergenceRow:
        row_index, delta = item
        noisy = make_noisy(f, delta, seed, stream=row_index)
        a = _check_shift(a_at_zero) if delta == 0 else schedule_a(schedule, delta)
        u = solve_shift(A, noisy.f_delta, a)
        error = float(np.linalg.norm(u - y))
        bound = bound_eq4(decomp, y, a, delta)
        noise, bias = shift_error_split(decomp, f, noisy.f_delta, y, a)
        return ConvergenceRow(
            delta=delta,
            a=a,
            error=error,
            bound_eq4=bound,
            residual=shift_residual(A, u, noisy.f_delta, a),
            noise_term=noise,
            bias_term=bias,
            within_bound=bool(error <= bound + tol),
        )

    workers = workers or get_settings().sweep_workers
    items = list(enumerate(deltas))
    if workers > 1:
        # map() keeps input order; seeding depends only on the row index
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate_row, items))
    else:
        rows = [evaluate_row(item) for item in items]

    for row in rows:
        logger.info("shift sweep: delta=%.3e a=%.3e error=%.6e bound=%.6e",
                    row.delta, row.a, row.error, row.bound_eq4)
        if not row.within_bound:
            logger.warning("error %.6e exceeds bound_eq4 %.6e at delta=%.3e", row.error, row.bound_eq4, row.delta)

    report = ConvergenceReport(rows=rows)
    if strict and report.violations:
        raise InvariantViolation(f"{len(report.violations)} sweep row(s) exceed bound_eq4")
    return report
