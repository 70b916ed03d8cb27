"""Canonical ill-posed test problems: (operator, f = A y_exact, y_exact)."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import ortho_group

from .errors import InputError
from .operators import GeneralOperator, Operator, SymmetricOperator
from .schemas import ProblemSpec

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Problem:
    operator: Operator
    f: np.ndarray
    y_exact: np.ndarray
    spec: ProblemSpec


def hilbert_matrix(dim: int) -> np.ndarray:
    """H[i, j] = 1/(i + j - 1) with 1-based indices."""
    return scipy.linalg.hilbert(dim)


def gauss_deconv_matrix(dim: int, width: float) -> np.ndarray:
    """
    Symmetric Toeplitz blur with kernel exp(-(i - j)^2 / (2 w^2)).

    Scaled by the full kernel sum (one scalar for every row) so the rows of an
    interior point sum to 1 and the matrix stays symmetric Toeplitz.
    """
    offsets = np.arange(dim, dtype=float)
    kernel = np.exp(-offsets ** 2 / (2.0 * width ** 2))
    total = kernel[0] + 2.0 * np.sum(kernel[1:])
    return scipy.linalg.toeplitz(kernel / total)


def second_derivative_matrix(dim: int) -> np.ndarray:
    """Dirichlet tridiag(1, -2, 1)/h^2 on the interior grid, h = 1/(dim + 1)."""
    h = 1.0 / (dim + 1)
    main = -2.0 * np.ones(dim)
    off = np.ones(dim - 1)
    return (np.diag(main) + np.diag(off, 1) + np.diag(off, -1)) / h ** 2


def first_derivative_matrix(dim: int) -> np.ndarray:
    """dim x (dim + 1) forward differences on x_j = j/dim, j = 0..dim."""
    h = 1.0 / dim
    D = np.zeros((dim, dim + 1))
    idx = np.arange(dim)
    D[idx, idx] = -1.0
    D[idx, idx + 1] = 1.0
    return D / h


def rank_deficient_matrix(dim: int, null_dim: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """V^T D V with null_dim zero diagonal entries; returns (matrix, V)."""
    V = ortho_group.rvs(dim, random_state=seed) if dim > 1 else np.ones((1, 1))
    d = np.zeros(dim)
    d[null_dim:] = np.geomspace(1.0, 1e-4, dim - null_dim)
    A = V.T @ (d[:, None] * V)
    return 0.5 * (A + A.T), V


def grid_points(spec: ProblemSpec) -> np.ndarray:
    """Sample points of the exact solution on [0, 1]."""
    if spec.kind == "first_derivative_rect":
        return np.arange(spec.dim + 1) / spec.dim
    return np.arange(1, spec.dim + 1) / (spec.dim + 1)


def exact_solution(spec: ProblemSpec) -> np.ndarray:
    if isinstance(spec.exact_solution, list):
        return np.asarray(spec.exact_solution, dtype=float)
    if spec.exact_solution == "ones":
        return np.ones(spec.domain_dim)
    return np.sin(2.0 * np.pi * grid_points(spec))


def generate_problem(spec: ProblemSpec) -> Problem:
    """Build the operator for `spec`, its exact solution y and f = A y."""
    y = exact_solution(spec)
    if spec.kind == "hilbert":
        A = SymmetricOperator(hilbert_matrix(spec.dim))
    elif spec.kind == "gauss_deconv":
        A = SymmetricOperator(gauss_deconv_matrix(spec.dim, spec.width))
    elif spec.kind == "second_derivative_sym":
        A = SymmetricOperator(second_derivative_matrix(spec.dim))
    elif spec.kind == "first_derivative_rect":
        A = GeneralOperator(first_derivative_matrix(spec.dim))
    elif spec.kind == "rank_deficient_sym":
        arr, V = rank_deficient_matrix(spec.dim, spec.null_dim, spec.seed)
        A = SymmetricOperator(arr)
        # rows of V with zero weight span N; keep y minimal-norm
        null_basis = V[: spec.null_dim].T
        y = y - null_basis @ (null_basis.T @ y)
    else:
        raise InputError(f"unknown problem kind {spec.kind!r}")

    f = A.entries @ y
    logger.info("generated %s problem, operator shape %s", spec.kind, A.shape)
    return Problem(operator=A, f=f, y_exact=y, spec=spec)
