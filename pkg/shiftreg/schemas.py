from __future__ import annotations
from pathlib import Path
from typing import ClassVar, Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

MAX_DIM = 2000

ProblemKind = Literal[
    "hilbert",
    "gauss_deconv",
    "second_derivative_sym",
    "first_derivative_rect",
    "rank_deficient_sym",
]

SYMMETRIC_KINDS = {"hilbert", "gauss_deconv", "second_derivative_sym", "rank_deficient_sym"}


class ShiftSchedule(BaseModel):
    """a(delta) = coefficient * delta**exponent.

    An exponent strictly inside (0, 1) gives a(delta) -> 0 and delta/a(delta) -> 0.
    """
    model_config = {"frozen": True}

    coefficient: float = Field(1.0, gt=0, description="C in a(delta) = C*delta**p")
    exponent: float = Field(0.5, gt=0, lt=1, description="p in a(delta) = C*delta**p")


class IterationSchedule(BaseModel):
    """n(delta) = ceil(coefficient * delta**(-exponent)).

    An exponent strictly inside (0, 1) gives n(delta) -> inf and delta*n(delta) -> 0.
    """
    model_config = {"frozen": True}

    coefficient: float = Field(1.0, gt=0, description="C in n(delta) = ceil(C*delta**-q)")
    exponent: float = Field(0.5, gt=0, lt=1, description="q in n(delta) = ceil(C*delta**-q)")


class TikhonovParameters(BaseModel):
    model_config = {"frozen": True}

    alpha: float = Field(..., gt=0, description="Regularization weight, units of ||A||^2")


class ProblemSpec(BaseModel):
    """Schema for a canonical ill-posed test problem.

    -'kind': which operator family to build
    -'dim': rows (and columns for the square kinds)
    -'dim2': columns of first_derivative_rect, always dim + 1
    -'width': Gaussian kernel width, gauss_deconv only
    -'null_dim': null-space dimension, rank_deficient_sym only
    -'exact_solution': 'ones', 'smooth_sine' or an explicit vector
    """
    kind: ProblemKind
    dim: int = Field(..., ge=1, le=MAX_DIM, description="Operator size")
    dim2: Optional[int] = Field(None, ge=2, le=MAX_DIM + 1, description="Columns of the rectangular kinds")
    width: float = Field(3.0, gt=0, description="Kernel width w for gauss_deconv")
    null_dim: int = Field(1, ge=0, description="Null-space dimension r for rank_deficient_sym")
    seed: int = Field(0, ge=0, description="Seed for the random orthogonal factor")
    exact_solution: Union[Literal["ones", "smooth_sine"], list[float]] = Field(
        "smooth_sine", description="Exact solution y (or f for the rectangular kind)"
    )

    @property
    def is_symmetric(self) -> bool:
        return self.kind in SYMMETRIC_KINDS

    @property
    def domain_dim(self) -> int:
        return self.dim + 1 if self.kind == "first_derivative_rect" else self.dim

    @model_validator(mode="after")
    def kind_specific_checks(self) -> "ProblemSpec":
        if self.kind == "first_derivative_rect":
            if self.dim2 is not None and self.dim2 != self.dim + 1:
                raise ValueError(f"first_derivative_rect needs dim2 = dim + 1 = {self.dim + 1} (got {self.dim2})")
        elif self.dim2 is not None and self.dim2 != self.dim:
            raise ValueError(f"{self.kind} is square; dim2 must be omitted or equal dim")
        if self.kind == "rank_deficient_sym" and self.null_dim >= self.dim:
            raise ValueError(f"null_dim must be smaller than dim (got {self.null_dim} >= {self.dim})")
        if isinstance(self.exact_solution, list) and len(self.exact_solution) != self.domain_dim:
            raise ValueError(
                f"Expected {self.domain_dim} entries in exact_solution, got {len(self.exact_solution)}."
            )
        return self


class OutputPaths(BaseModel):
    report: Optional[str] = Field(None, description="Shift / comparison report CSV")
    unbounded_report: Optional[str] = Field(None, description="Unbounded-evaluation report CSV")


class ExperimentConfig(BaseModel):
    """Schema for a sweep / compare experiment read from JSON."""
    problem: ProblemSpec
    deltas: list[float] = Field(..., min_length=1, description="Noise levels, strictly decreasing")
    shift_schedule: ShiftSchedule = Field(default_factory=ShiftSchedule)
    iteration_schedule: IterationSchedule = Field(default_factory=IterationSchedule)
    seed: int = Field(0, ge=0, description="Noise seed; one substream per delta row")
    mode: Optional[Literal["shift", "unbounded", "both"]] = Field(
        None, description="Which sweep(s) to run; defaults by operator kind"
    )
    outputs: OutputPaths = Field(default_factory=OutputPaths)

    @field_validator("deltas")
    @classmethod
    def validate_deltas(cls, v: list[float]) -> list[float]:
        for i, val in enumerate(v):
            if not val > 0:
                raise ValueError(f"delta number {i} must be positive (got {val})")
        for i in range(1, len(v)):
            if not v[i] < v[i - 1]:
                raise ValueError(f"deltas must be strictly decreasing (entry {i}: {v[i]} >= {v[i - 1]})")
        return v

    @model_validator(mode="after")
    def resolve_mode(self) -> "ExperimentConfig":
        if self.mode is None:
            self.mode = "shift" if self.problem.is_symmetric else "unbounded"
        if self.mode in ("shift", "both") and not self.problem.is_symmetric:
            raise ValueError(f"mode '{self.mode}' needs a symmetric problem kind, got {self.problem.kind}")
        return self

    @classmethod
    def from_json_file(cls, path: str | Path) -> "ExperimentConfig":
        from .reports import load_json
        return cls.model_validate(load_json(path))


# Report rows. CSV column order is fixed by `columns`.

class ConvergenceRow(BaseModel):
    columns: ClassVar[tuple[str, ...]] = ("delta", "a", "error", "bound_eq4", "residual")

    delta: float
    a: float
    error: Optional[float]
    bound_eq4: float
    residual: float
    noise_term: Optional[float] = None
    bias_term: Optional[float] = None
    within_bound: bool = True


class EvalRow(BaseModel):
    columns: ClassVar[tuple[str, ...]] = ("delta", "n_used", "error", "bound_eq9", "lemma1_norm")

    delta: float
    n_used: int
    error: Optional[float]
    bound_eq9: Optional[float]
    lemma1_norm: float
    within_bound: bool = True


class CondReport(BaseModel):
    columns: ClassVar[tuple[str, ...]] = ("a", "kappa_shift", "kappa_normal", "ratio_check")

    a: float = Field(..., gt=0)
    kappa_shift: float
    kappa_normal: float
    ratio_check: float


class ComparisonRow(BaseModel):
    columns: ClassVar[tuple[str, ...]] = (
        "delta", "a", "alpha", "shift_error", "tikhonov_error",
        "kappa_shift", "kappa_normal", "ratio_check", "shift_flops", "tikhonov_flops",
    )

    delta: float
    a: float
    alpha: float
    shift_error: float
    tikhonov_error: float
    kappa_shift: float
    kappa_normal: float
    ratio_check: float
    shift_flops: int
    tikhonov_flops: int


class FlopReport(BaseModel):
    columns: ClassVar[tuple[str, ...]] = ("method", "dim", "modeled_flops", "measured_seconds", "kappa")

    method: Literal["shift", "tikhonov"]
    dim: int = Field(..., ge=1)
    modeled_flops: int = Field(..., gt=0)
    measured_seconds: float
    kappa: float
