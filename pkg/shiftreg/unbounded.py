"""Stable evaluation of v = Af from noisy f_delta.

v = Af is equivalent to Bv = Ff with B = (I + Q)^-1, Q = AA^T and
F = BA = A(I + T)^-1, T = A^T A, ||F|| <= 1/2. The iteration

    v_{n+1} = (I - B) v_n + F f_delta,   v_0 orthogonal to N* = ker A^T,

stopped at n = n(delta) with n(delta) -> inf and delta*n(delta) -> 0,
converges to Af as delta -> 0.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .config import get_settings
from .errors import InputError, InvariantViolation, SolverError
from .operators import (
    GeneralOperator,
    SpectralDecomposition,
    SymmetricOperator,
    as_vector,
    check_length,
    eigendecompose,
    make_noisy,
    null_projector,
)
from .schemas import EvalRow, IterationSchedule

logger = logging.getLogger(__name__)

LEMMA1_NORM_ATOL = 1e-12
COMMUTATION_RTOL = 1e-10
START_VECTOR_RTOL = 1e-10
BOUND_ATOL = 1e-8


@dataclass(frozen=True)
class EvaluatorOperators:
    """Dense B, F, H and friends built once from A (m x n)."""
    A: GeneralOperator
    Q: np.ndarray
    T: np.ndarray
    B: np.ndarray
    F: np.ndarray
    F_left: np.ndarray
    H: np.ndarray
    B_decomp: SpectralDecomposition
    P_nstar: np.ndarray

    @property
    def m(self) -> int:
        return self.A.rows

    @property
    def n(self) -> int:
        return self.A.cols

    def commutation_residual(self) -> float:
        """||(I + Q)^-1 A - A (I + T)^-1||_F."""
        return float(np.linalg.norm(self.F_left - self.F))


@dataclass(frozen=True)
class EvalReport:
    v_delta: np.ndarray
    n_used: int
    delta: float
    error_vs_Af: Optional[float]
    bound_eq9: Optional[float]
    lemma1_norm: float

    def to_row(self, within_bound: bool = True) -> EvalRow:
        return EvalRow(
            delta=self.delta,
            n_used=self.n_used,
            error=self.error_vs_Af,
            bound_eq9=self.bound_eq9,
            lemma1_norm=self.lemma1_norm,
            within_bound=bool(within_bound),
        )


def _spd_inverse_apply(M: np.ndarray, rhs: np.ndarray, label: str) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(M, lower=True)
        return scipy.linalg.cho_solve(factor, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"Cholesky factorization of {label} failed: {exc}", dim=M.shape[0],
                          norm=float(np.linalg.norm(M))) from exc


def build_operators(A: GeneralOperator | SymmetricOperator) -> EvaluatorOperators:
    """Form Q, T, B = (I+Q)^-1, F = A(I+T)^-1, H = I - B and B's eigenpairs."""
    if isinstance(A, SymmetricOperator):
        A = GeneralOperator(A.entries)
    arr = A.entries
    m, n = arr.shape
    Q = arr @ arr.T
    T = arr.T @ arr
    I_m = np.eye(m)

    B = _spd_inverse_apply(I_m + Q, I_m, "I + Q")
    B = 0.5 * (B + B.T)
    # A (I+T)^-1 = ((I+T)^-1 A^T)^T since I + T is symmetric
    F = _spd_inverse_apply(np.eye(n) + T, arr.T, "I + T").T
    F_left = B @ arr
    H = I_m - B
    B_decomp = eigendecompose(SymmetricOperator(B))
    P_nstar = null_projector(A, which="N_star")
    logger.debug("build_operators: A is %dx%d, spec(B) in [%.3e, %.3e]",
                 m, n, B_decomp.eigenvalues[0], B_decomp.eigenvalues[-1])
    return EvaluatorOperators(A=A, Q=Q, T=T, B=B, F=F, F_left=F_left, H=H,
                              B_decomp=B_decomp, P_nstar=P_nstar)


def verify_lemma1(ops: EvaluatorOperators, strict: bool = True) -> float:
    """Return ||F||_2; when strict, raise unless ||F|| <= 1/2 and the commutation identity holds."""
    norm = float(np.linalg.norm(ops.F, 2))
    if strict:
        if norm > 0.5 + LEMMA1_NORM_ATOL:
            raise InvariantViolation(f"||A(I + A^T A)^-1|| = {norm!r} exceeds 1/2")
        residual = ops.commutation_residual()
        limit = COMMUTATION_RTOL * (1.0 + np.linalg.norm(ops.A.entries))
        if residual > limit:
            raise InvariantViolation(
                f"(I + Q)^-1 A - A (I + T)^-1 has norm {residual:.3e} > {limit:.3e}"
            )
    return norm


def _start_vector(ops: EvaluatorOperators, v0) -> np.ndarray:
    if v0 is None:
        return np.zeros(ops.m)
    v0 = as_vector(v0, "v0")
    check_length(v0, ops.m, "v0")
    removed = ops.P_nstar @ v0
    removed_norm = float(np.linalg.norm(removed))
    if removed_norm > START_VECTOR_RTOL * (1.0 + np.linalg.norm(v0)):
        logger.warning("v0 is not orthogonal to ker A^T; projected out a component of norm %.3e", removed_norm)
    return v0 - removed


def _check_iterations(n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise InputError(f"iteration count must be a nonnegative integer (got {n})")
    return int(n)


def iterate_eq7(ops: EvaluatorOperators, f_delta, n: int, v0=None) -> np.ndarray:
    """v_n after n steps of v <- H v + F f_delta; n = 0 returns (projected) v0."""
    n = _check_iterations(n)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, ops.n, "f_delta")
    v = _start_vector(ops, v0)
    g = ops.F @ f_delta
    if np.iscomplexobj(g):
        v = v.astype(complex)
    for _ in range(n):
        v = ops.H @ v + g
    return v


def iteration_history(ops: EvaluatorOperators, f_delta, n: int, target, v0=None) -> np.ndarray:
    """||v_k - target|| for k = 0..n from a single pass of the iteration."""
    n = _check_iterations(n)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, ops.n, "f_delta")
    target = as_vector(target, "target")
    check_length(target, ops.m, "target")
    v = _start_vector(ops, v0)
    g = ops.F @ f_delta
    errors = np.empty(n + 1)
    errors[0] = np.linalg.norm(v - target)
    for k in range(1, n + 1):
        v = ops.H @ v + g
        errors[k] = np.linalg.norm(v - target)
    return errors


def iterate_summed(ops: EvaluatorOperators, f_delta, n: int, v0=None) -> np.ndarray:
    """v_n = sum_{j<n} H^j F f_delta + H^n v0, evaluated in the eigenbasis of B."""
    n = _check_iterations(n)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, ops.n, "f_delta")
    v = _start_vector(ops, v0)
    if n == 0:
        return v
    decomp = ops.B_decomp
    s = np.clip(decomp.eigenvalues, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        # s = 1 on ker A^T gives log_h = -inf and h^n = 0
        log_h = np.log1p(-s)
        h_pow = np.exp(n * log_h)
        # (1 - h^n)/(1 - h) written to stay accurate for tiny s
        geometric = np.where(s > 0, -np.expm1(n * log_h) / s, float(n))
    coeffs = geometric * decomp.coefficients(ops.F @ f_delta) + h_pow * decomp.coefficients(v)
    return decomp.synthesize(coeffs)


def schedule_n(schedule: IterationSchedule, delta: float) -> int:
    """n(delta) = ceil(C * delta**-q), at least 1."""
    if not delta > 0:
        raise InputError(f"delta must be > 0 to evaluate n(delta) (got {delta})")
    value = schedule.coefficient * delta ** (-schedule.exponent)
    nearest = round(value)
    # pow() may land a few ulps off an integer
    if abs(value - nearest) <= 8 * math.ulp(value):
        return max(1, int(nearest))
    return max(1, math.ceil(value))


def _tail_weights(ops: EvaluatorOperators, w0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w0 = as_vector(w0, "w0")
    check_length(w0, ops.m, "w0")
    s = np.clip(ops.B_decomp.eigenvalues, 0.0, 1.0)
    mass = np.abs(ops.B_decomp.coefficients(w0)) ** 2
    return s, mass


def bound_eq9(ops: EvaluatorOperators, w0, n: int, delta: float) -> float:
    """n*delta/2 + sqrt(sum_k (1 - s_k)^(2n) |<w0, phi_k>|^2) over the eigenpairs of B."""
    n = _check_iterations(n)
    if delta < 0:
        raise InputError(f"delta must be >= 0 (got {delta})")
    s, mass = _tail_weights(ops, w0)
    return float(n * delta / 2.0 + np.sqrt(np.sum((1.0 - s) ** (2 * n) * mass)))


def bound_eq9_curve(ops: EvaluatorOperators, w0, n_max: int, delta: float) -> np.ndarray:
    """bound_eq9 for every n in 0..n_max."""
    n_max = _check_iterations(n_max)
    s, mass = _tail_weights(ops, w0)
    steps = np.arange(n_max + 1)
    decay = (1.0 - s)[None, :] ** (2 * steps)[:, None]
    return steps * delta / 2.0 + np.sqrt(decay @ mass)


def tail_mass_eq10(ops: EvaluatorOperators, w0, h: float, n: int) -> float:
    """sum_{s_k >= h} (1 - s_k)^(2n) |<w0, phi_k>|^2."""
    if not 0 <= h < 1:
        raise InputError(f"h must lie in [0, 1) (got {h})")
    n = _check_iterations(n)
    s, mass = _tail_weights(ops, w0)
    keep = s >= h
    return float(np.sum((1.0 - s[keep]) ** (2 * n) * mass[keep]))


def evaluate_unbounded(
    A: GeneralOperator | SymmetricOperator,
    f_delta,
    delta: float,
    schedule: Optional[IterationSchedule] = None,
    v0=None,
    *,
    n: Optional[int] = None,
    target=None,
    ops: Optional[EvaluatorOperators] = None,
) -> EvalReport:
    """
    Approximate Af from f_delta with n(delta) steps (or an explicit n).

    `target` is the exact Af when known; it enables the error and bound_eq9 fields.
    """
    if delta < 0:
        raise InputError(f"delta must be >= 0 (got {delta})")
    if n is None:
        if delta == 0:
            raise InputError("delta = 0 needs an explicit iteration count n")
        n = schedule_n(schedule or IterationSchedule(), delta)
    n = _check_iterations(n)
    ops = ops or build_operators(A)
    f_delta = as_vector(f_delta, "f_delta")
    check_length(f_delta, ops.n, "f_delta")

    start = _start_vector(ops, v0)
    v = iterate_eq7(ops, f_delta, n, start)
    norm_F = verify_lemma1(ops, strict=False)

    error = bound = None
    if target is not None:
        target = as_vector(target, "target")
        check_length(target, ops.m, "target")
        error = float(np.linalg.norm(v - target))
        bound = bound_eq9(ops, start - target, n, delta)
    return EvalReport(v_delta=v, n_used=n, delta=float(delta), error_vs_Af=error,
                      bound_eq9=bound, lemma1_norm=norm_F)


def evaluation_sweep(
    A: GeneralOperator | SymmetricOperator,
    f,
    deltas: Sequence[float],
    schedule: IterationSchedule,
    seed: int,
    *,
    workers: Optional[int] = None,
    strict: bool = False,
) -> list[EvalRow]:
    """One evaluate_unbounded row per delta (descending), noise substream = row index."""
    f = as_vector(f, "f")
    deltas = sorted((float(d) for d in deltas), reverse=True)
    if any(not d > 0 for d in deltas):
        raise InputError("deltas must be > 0 for a scheduled sweep")
    ops = build_operators(A)
    check_length(f, ops.n, "f")
    target = ops.A.entries @ f
    tol = BOUND_ATOL * (1.0 + np.linalg.norm(target))

    def evaluate_row(item: tuple[int, float]) -> EvalRow:
        row_index, delta = item
        noisy = make_noisy(f, delta, seed, stream=row_index)
        report = evaluate_unbounded(ops.A, noisy.f_delta, delta, schedule, target=target, ops=ops)
        return report.to_row(within_bound=report.error_vs_Af <= report.bound_eq9 + tol)

    workers = workers or get_settings().sweep_workers
    items = list(enumerate(deltas))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(evaluate_row, items))
    else:
        rows = [evaluate_row(item) for item in items]

    for row in rows:
        logger.info("unbounded sweep: delta=%.3e n=%d error=%.6e bound=%.6e",
                    row.delta, row.n_used, row.error, row.bound_eq9)
        if not row.within_bound:
            logger.warning("error %.6e exceeds bound_eq9 %.6e at delta=%.3e", row.error, row.bound_eq9, row.delta)
    if strict and any(not r.within_bound for r in rows):
        raise InvariantViolation("unbounded sweep row(s) exceed bound_eq9")
    return rows
