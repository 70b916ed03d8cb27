"""Dense operators, spectral decomposition, minimal-norm solutions and noise.

Operators are stored real; vectors may be complex because the shifted
resolvent (A + ia)^-1 is complex.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np
import scipy.linalg

from .errors import InputError, SolverError
from .schemas import MAX_DIM

logger = logging.getLogger(__name__)

SYMMETRY_RTOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SymmetricOperator:
    """Dense real symmetric matrix standing for a selfadjoint operator."""
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if np.iscomplexobj(arr):
            raise InputError("SymmetricOperator entries must be real")
        arr = arr.astype(float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise InputError(f"SymmetricOperator needs a non-empty square matrix, got shape {arr.shape}")
        if arr.shape[0] > MAX_DIM:
            raise InputError(f"dim {arr.shape[0]} exceeds the supported maximum {MAX_DIM}")
        if not np.all(np.isfinite(arr)):
            raise InputError("SymmetricOperator entries must be finite")
        scale = np.max(np.abs(arr))
        asym = np.max(np.abs(arr - arr.T))
        if asym > SYMMETRY_RTOL * scale:
            raise InputError(f"matrix is not symmetric: max|A - A^T| = {asym:.3e} (max|A| = {scale:.3e})")
        object.__setattr__(self, "entries", _frozen(arr))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


@dataclass(frozen=True)
class GeneralOperator:
    """Dense real m x n matrix standing for a closed, densely defined operator."""
    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if np.iscomplexobj(arr):
            raise InputError("GeneralOperator entries must be real")
        arr = arr.astype(float)
        if arr.ndim != 2 or arr.size == 0:
            raise InputError(f"GeneralOperator needs a non-empty 2-D matrix, got shape {arr.shape}")
        if max(arr.shape) > MAX_DIM + 1:
            raise InputError(f"shape {arr.shape} exceeds the supported maximum {MAX_DIM}")
        if not np.all(np.isfinite(arr)):
            raise InputError("GeneralOperator entries must be finite")
        object.__setattr__(self, "entries", _frozen(arr))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape


Operator = Union[SymmetricOperator, GeneralOperator]


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenpairs of a symmetric operator, eigenvalues ascending.

    Column k of `eigenvectors` belongs to eigenvalues[k].
    """
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    source_dim: int

    def coefficients(self, x: np.ndarray) -> np.ndarray:
        """<x, v_k> for every k."""
        return self.eigenvectors.T @ x

    def synthesize(self, coeffs: np.ndarray) -> np.ndarray:
        return self.eigenvectors @ coeffs

    def reconstruct(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.T

    @property
    def max_abs_eigenvalue(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


@dataclass(frozen=True)
class NoisyDatum:
    f_delta: np.ndarray
    delta: float


@dataclass(frozen=True)
class MinimalNormSolution:
    y: np.ndarray
    rank_tolerance: float
    effective_rank: int
    residual: float


def as_array(A: Operator | np.ndarray) -> np.ndarray:
    if isinstance(A, (SymmetricOperator, GeneralOperator)):
        return A.entries
    return np.asarray(A, dtype=float)


def as_vector(x, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x)
    if arr.ndim == 2 and 1 in arr.shape:
        arr = arr.reshape(-1)
    if arr.ndim != 1:
        raise InputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.iscomplexobj(arr):
        arr = arr.astype(float)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} entries must be finite")
    return arr


def check_length(x: np.ndarray, expected: int, name: str = "vector") -> None:
    if x.shape[0] != expected:
        raise InputError(f"dimension mismatch: {name} has length {x.shape[0]}, expected {expected}")


def eigendecompose(A: SymmetricOperator) -> SpectralDecomposition:
    """Symmetric eigendecomposition; eigenvalues ascending, orthonormal eigenvectors."""
    try:
        w, V = scipy.linalg.eigh(A.entries)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(
            f"symmetric eigensolver did not converge: {exc}",
            dim=A.dim,
            norm=float(np.linalg.norm(A.entries)),
        ) from exc
    logger.debug("eigendecompose: dim=%d, lambda in [%.3e, %.3e]", A.dim, w[0], w[-1])
    return SpectralDecomposition(eigenvalues=_frozen(w), eigenvectors=_frozen(V), source_dim=A.dim)


def default_rank_tolerance(A: Operator) -> float:
    """machine epsilon * dim * largest |eigenvalue| (largest singular value for rectangular A).

    eigh may leave a numerically zero eigenvalue slightly above this; pass an explicit
    rank_tolerance when the spectral gap is known.
    """
    arr = as_array(A)
    if isinstance(A, SymmetricOperator):
        scale = float(np.max(np.abs(scipy.linalg.eigvalsh(arr))))
    else:
        scale = float(scipy.linalg.svdvals(arr)[0])
    return float(np.finfo(float).eps * max(arr.shape) * scale)


def _resolve_tolerance(A: Operator, rank_tolerance: Optional[float]) -> float:
    if rank_tolerance is None:
        return default_rank_tolerance(A)
    if rank_tolerance < 0:
        raise InputError(f"rank_tolerance must be >= 0 (got {rank_tolerance})")
    return float(rank_tolerance)


def _svd(arr: np.ndarray):
    try:
        return scipy.linalg.svd(arr, full_matrices=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolverError(f"SVD did not converge: {exc}", dim=max(arr.shape),
                          norm=float(np.linalg.norm(arr))) from exc


def minimal_norm_solution(
    A: Operator, f, rank_tolerance: Optional[float] = None
) -> MinimalNormSolution:
    """Pseudoinverse solution; directions with |lambda| (or sigma) <= tolerance are dropped."""
    f = as_vector(f, "f")
    arr = as_array(A)
    check_length(f, arr.shape[0], "f")
    tol = _resolve_tolerance(A, rank_tolerance)

    if isinstance(A, SymmetricOperator):
        decomp = eigendecompose(A)
        lam = decomp.eigenvalues
        keep = np.abs(lam) > tol
        coeffs = decomp.coefficients(f)
        inv = np.zeros_like(coeffs)
        inv[keep] = coeffs[keep] / lam[keep]
        y = decomp.synthesize(inv)
        rank = int(np.count_nonzero(keep))
    else:
        U, s, Vh = _svd(arr)
        keep = s > tol
        rank = int(np.count_nonzero(keep))
        coeffs = U[:, :rank].T @ f
        y = Vh[:rank].T @ (coeffs / s[:rank])

    residual = float(np.linalg.norm(arr @ y - f))
    return MinimalNormSolution(y=y, rank_tolerance=tol, effective_rank=rank, residual=residual)


def null_projector(
    A: Operator,
    rank_tolerance: Optional[float] = None,
    which: Literal["N", "N_star"] = "N",
) -> np.ndarray:
    """Orthogonal projector onto the numerical null space of A (N) or of A^T (N_star)."""
    if which not in ("N", "N_star"):
        raise InputError(f"which must be 'N' or 'N_star' (got {which!r})")
    arr = as_array(A)
    tol = _resolve_tolerance(A, rank_tolerance)

    if isinstance(A, SymmetricOperator):
        decomp = eigendecompose(A)
        basis = decomp.eigenvectors[:, np.abs(decomp.eigenvalues) <= tol]
    else:
        U, s, Vh = _svd(arr)
        rank = int(np.count_nonzero(s > tol))
        # full_matrices=True: trailing singular vectors span the kernels
        basis = Vh[rank:].T if which == "N" else U[:, rank:]

    P = basis @ basis.T
    return 0.5 * (P + P.T)


def make_noisy(f, delta: float, seed: int, stream: int = 0) -> NoisyDatum:
    """f_delta = f + delta * e/||e||, e standard normal from the (seed, stream) generator.

    ||f_delta - f|| equals delta, not just bounds it.
    """
    if delta < 0:
        raise InputError(f"delta must be >= 0 (got {delta})")
    f = as_vector(f, "f")
    if delta == 0:
        return NoisyDatum(f_delta=f.copy(), delta=0.0)

    counter = 0
    while True:
        rng = np.random.default_rng([seed, stream, counter])
        e = rng.standard_normal(f.shape[0])
        norm = np.linalg.norm(e)
        if norm > 0:
            break
        counter += 1
    return NoisyDatum(f_delta=f + (delta / norm) * e, delta=float(delta))
