from __future__ import annotations
from typing import Any, Dict, List

from pydantic import ValidationError


class ShiftregError(Exception):
    """Base class for all errors raised by shiftreg."""
    exit_code = 1


class InputError(ShiftregError, ValueError):
    """Bad argument, dimension mismatch or malformed input file/config."""
    exit_code = 2


class SolverError(ShiftregError, RuntimeError):
    """A dense factorization or eigensolver broke down."""

    def __init__(self, message: str, *, dim: int | None = None, norm: float | None = None):
        details = []
        if dim is not None:
            details.append(f"dim={dim}")
        if norm is not None:
            details.append(f"norm={norm:.6g}")
        if details:
            message = f"{message} ({', '.join(details)})"
        super().__init__(message)
        self.dim = dim
        self.norm = norm


class InvariantViolation(ShiftregError):
    """A proven bound or structural identity failed numerically."""


class ReportIOError(ShiftregError):
    """A report or result file could not be written."""


def flatten_validation_errors(exc: ValidationError) -> List[Dict[str, Any]]:
    """
    Convert pydantic error objects into a list of dicts.
    """
    flat: List[Dict[str, Any]] = []
    for err in exc.errors():
        item: Dict[str, Any] = {
            "loc": list(err.get("loc", [])),
            "msg": str(err.get("msg", "")),
            "type": str(err.get("type", "")),
        }
        flat.append(item)
    return flat


def format_validation_errors(exc: ValidationError, source: str = "config") -> str:
    """One line per error, e.g. 'exp.json: problem.dim: Input should be greater than 0'."""
    lines = []
    for item in flatten_validation_errors(exc):
        loc = ".".join(str(x) for x in item["loc"]) or "<root>"
        lines.append(f"{source}: {loc}: {item['msg']}")
    return "\n".join(lines)
