"""CSV and JSON file handling: matrices, vectors, configs and reports."""
from __future__ import annotations

import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from .errors import InputError, ReportIOError
from .schemas import ConvergenceRow

logger = logging.getLogger(__name__)


def format_float(x: float) -> str:
    """17 significant digits, which round-trips every double."""
    return format(float(x), ".17g")


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def _read_text(path: str | Path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: cannot read file ({exc.strerror or exc})") from exc


def _parse_rows(path: str | Path) -> list[list[float]]:
    rows: list[list[float]] = []
    reader = csv.reader(io.StringIO(_read_text(path)))
    for line_no, raw in enumerate(reader, start=1):
        cells = [c.strip() for c in raw]
        if not cells or all(c == "" for c in cells):
            continue
        values = []
        for col, cell in enumerate(cells, start=1):
            try:
                values.append(float(cell))
            except ValueError:
                raise InputError(f"{path} line {line_no}, column {col}: cannot parse {cell!r} as a number") from None
            if not np.isfinite(values[-1]):
                raise InputError(f"{path} line {line_no}, column {col}: value {cell!r} is not finite")
        if rows and len(values) != len(rows[0]):
            raise InputError(
                f"{path} line {line_no}: expected {len(rows[0])} columns, got {len(values)}"
            )
        rows.append(values)
    if not rows:
        raise InputError(f"{path}: file contains no data")
    return rows


def load_matrix(path: str | Path) -> np.ndarray:
    """Headerless CSV, one matrix row per line."""
    return np.array(_parse_rows(path), dtype=float)


def load_vector(path: str | Path) -> np.ndarray:
    """Single-column CSV (a single row is accepted too)."""
    arr = np.array(_parse_rows(path), dtype=float)
    if arr.shape[1] == 1:
        return arr[:, 0]
    if arr.shape[0] == 1:
        return arr[0]
    raise InputError(f"{path}: expected a single column, got shape {arr.shape}")


def _write_text(path: str | Path, text: str) -> None:
    try:
        target = Path(path)
        if target.parent and not target.parent.exists():
            target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    except OSError as exc:
        raise ReportIOError(f"{path}: cannot write file ({exc.strerror or exc})") from exc


def save_matrix(path: str | Path, matrix: np.ndarray) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in np.atleast_2d(matrix):
        writer.writerow(format_float(x) for x in row)
    _write_text(path, buf.getvalue())


def save_vector(path: str | Path, vector: np.ndarray) -> None:
    """One entry per line; complex vectors are written as `re,im`."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for x in np.asarray(vector).reshape(-1):
        if np.iscomplexobj(vector):
            writer.writerow([format_float(x.real), format_float(x.imag)])
        else:
            writer.writerow([format_float(x)])
    _write_text(path, buf.getvalue())


def load_json(path: str | Path) -> Any:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def write_csv(rows: Iterable[dict], headers: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(headers), extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _format_cell(r.get(k)) for k in headers})
    return buf.getvalue()


def emit_report(
    rows: Sequence[BaseModel] | Any,
    path: str | Path,
    columns: Optional[Sequence[str]] = None,
    row_model: Optional[type[BaseModel]] = None,
) -> None:
    """
    Write report rows as headered CSV. `rows` may be a list of row models or a
    report object with a `rows` attribute.

    Columns come from `columns`, else `row_model.columns`, else the first row's
    model. An empty report falls back to the convergence columns, so it still
    gives a header-only file.
    """
    rows = list(getattr(rows, "rows", rows))
    if columns is None:
        if row_model is not None:
            columns = row_model.columns
        elif rows:
            columns = type(rows[0]).columns
        else:
            columns = ConvergenceRow.columns
    text = write_csv((r.model_dump() for r in rows), columns)
    _write_text(path, text)
    logger.info("wrote %d report row(s) to %s", len(rows), path)


def parse_report(path: str | Path) -> tuple[list[str], list[dict[str, Any]]]:
    """Read a report back; numeric cells become int or float, blanks become None."""
    reader = csv.DictReader(io.StringIO(_read_text(path)))
    header = list(reader.fieldnames or [])
    rows: list[dict[str, Any]] = []
    for r in reader:
        parsed: dict[str, Any] = {}
        for key, cell in r.items():
            if cell is None or cell == "":
                parsed[key] = None
                continue
            try:
                parsed[key] = int(cell)
            except ValueError:
                try:
                    parsed[key] = float(cell)
                except ValueError:
                    parsed[key] = cell
        rows.append(parsed)
    return header, rows
