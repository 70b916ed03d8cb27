import numpy as np
import pytest
from numpy.testing import assert_allclose

from shiftreg.errors import InputError, ReportIOError
from shiftreg.reports import (
    emit_report,
    format_float,
    load_json,
    load_matrix,
    load_vector,
    parse_report,
    save_matrix,
    save_vector,
    write_csv,
)
from shiftreg.schemas import ConvergenceRow, EvalRow
from shiftreg.shift import ConvergenceReport


def test_format_float_round_trips():
    for x in (0.1, 1e-17, 2.0 / 3.0, 123456789.123456789):
        assert float(format_float(x)) == x


def test_save_and_load_matrix(tmp_path):
    M = np.random.default_rng(0).standard_normal((4, 3))
    path = tmp_path / "m.csv"
    save_matrix(path, M)
    assert np.array_equal(load_matrix(path), M)


def test_save_complex_vector_writes_re_im(tmp_path):
    path = tmp_path / "u.csv"
    save_vector(path, np.array([1 - 2j, 0.5j]))
    assert path.read_text().splitlines() == ["1,-2", "0,0.5"]


def test_load_vector_accepts_column_or_row(tmp_path):
    col = tmp_path / "col.csv"
    col.write_text("1\n2\n3\n")
    row = tmp_path / "row.csv"
    row.write_text("1,2,3\n")
    assert_allclose(load_vector(col), [1.0, 2.0, 3.0])
    assert_allclose(load_vector(row), [1.0, 2.0, 3.0])


def test_load_vector_rejects_matrix(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("1,2\n3,4\n")
    with pytest.raises(InputError):
        load_vector(path)


def test_malformed_matrix_reports_line_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2\n3,oops\n")
    with pytest.raises(InputError) as exc:
        load_matrix(path)
    assert "line 2, column 2" in str(exc.value)


def test_ragged_matrix_rejected(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("1,2\n3\n")
    with pytest.raises(InputError) as exc:
        load_matrix(path)
    assert "line 2" in str(exc.value)


def test_non_finite_and_empty_inputs(tmp_path):
    nan_file = tmp_path / "nan.csv"
    nan_file.write_text("1\nnan\n")
    with pytest.raises(InputError):
        load_vector(nan_file)
    empty = tmp_path / "empty.csv"
    empty.write_text("\n")
    with pytest.raises(InputError):
        load_matrix(empty)
    with pytest.raises(InputError):
        load_matrix(tmp_path / "missing.csv")


def test_load_json_reports_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "deltas": [1e-2,\n}')
    with pytest.raises(InputError) as exc:
        load_json(path)
    assert "line 3" in str(exc.value)


def test_write_csv_blanks_missing_values():
    text = write_csv([{"a": 1, "b": None}], ["a", "b"])
    assert text == "a,b\n1,\n"


def test_emit_and_parse_report(tmp_path):
    rows = [
        ConvergenceRow(delta=1e-2, a=0.1, error=0.25, bound_eq4=0.5, residual=1e-16),
        ConvergenceRow(delta=1e-4, a=0.01, error=0.025, bound_eq4=0.05, residual=2e-16),
    ]
    path = tmp_path / "out" / "report.csv"
    emit_report(rows, path)
    header, parsed = parse_report(path)
    assert header == list(ConvergenceRow.columns)
    assert parsed[1]["delta"] == 1e-4
    assert parsed[0]["bound_eq4"] == 0.5


def test_emit_report_writes_integer_and_blank_cells(tmp_path):
    row = EvalRow(delta=1e-2, n_used=10, error=None, bound_eq9=None, lemma1_norm=0.5)
    path = tmp_path / "eval.csv"
    emit_report([row], path)
    header, parsed = parse_report(path)
    assert header == ["delta", "n_used", "error", "bound_eq9", "lemma1_norm"]
    assert parsed[0]["n_used"] == 10
    assert parsed[0]["error"] is None


def test_empty_report_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report([], path)
    assert path.read_text() == "delta,a,error,bound_eq4,residual\n"

    eval_path = tmp_path / "empty_eval.csv"
    emit_report([], eval_path, row_model=EvalRow)
    assert eval_path.read_text() == "delta,n_used,error,bound_eq9,lemma1_norm\n"


def test_emit_report_accepts_report_object(tmp_path):
    path = tmp_path / "sweep.csv"
    emit_report(ConvergenceReport(rows=[]), path)
    header, rows = parse_report(path)
    assert header == list(ConvergenceRow.columns)
    assert rows == []


def test_unwritable_report_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportIOError):
        emit_report([], blocker / "report.csv", columns=ConvergenceRow.columns)
