import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose

from shiftreg.bench import (
    benchmark,
    compare_methods,
    condition_numbers,
    flop_model,
    flop_stages,
    solve_tikhonov,
    tikhonov_spectral,
)
from shiftreg.config import THREAD_ENV_VARS
from shiftreg.errors import InputError
from shiftreg.operators import GeneralOperator, SymmetricOperator, eigendecompose
from shiftreg.problems import hilbert_matrix
from shiftreg.schemas import ShiftSchedule


def test_tikhonov_identity_halves_data():
    g = np.array([1.0, -2.0, 0.5])
    assert_allclose(solve_tikhonov(SymmetricOperator(np.eye(3)), g, 1.0), g / 2)


def test_tikhonov_zero_operator_gives_zero():
    assert_allclose(solve_tikhonov(SymmetricOperator(np.zeros((2, 2))), [1.0, 1.0], 0.3), [0.0, 0.0])


def test_tikhonov_diagonal_matches_filter_formula():
    lam = np.array([1.0, 2.0])
    f = np.array([1.0, 2.0])
    u = solve_tikhonov(SymmetricOperator(np.diag(lam)), f, 0.01)
    assert_allclose(u, lam * f / (lam ** 2 + 0.01))


def test_tikhonov_rectangular_operator():
    A = GeneralOperator(np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))
    u = solve_tikhonov(A, [1.0, 1.0], 1.0)
    assert_allclose(u, [0.5, 0.4, 0.0])


@pytest.mark.parametrize("alpha", [0.0, -1e-3])
def test_tikhonov_rejects_nonpositive_alpha(alpha):
    with pytest.raises(InputError) as exc:
        solve_tikhonov(SymmetricOperator(np.eye(2)), [1.0, 1.0], alpha)
    assert "tikhonov: alpha" in str(exc.value)


def test_tikhonov_spectral_agrees_with_direct_solve():
    A = SymmetricOperator(hilbert_matrix(6))
    f = np.random.default_rng(0).standard_normal(6)
    direct = solve_tikhonov(A, f, 1e-2)
    spectral = tikhonov_spectral(eigendecompose(A), f, 1e-2)
    assert np.linalg.norm(direct - spectral) <= 1e-10 * np.linalg.norm(direct)


def test_condition_numbers_examples():
    cond = condition_numbers(eigendecompose(SymmetricOperator(np.eye(3))), 0.7)
    assert cond.kappa_shift == pytest.approx(1.0)
    assert cond.kappa_normal == pytest.approx(1.0)
    assert cond.ratio_check == pytest.approx(1.0)

    cond = condition_numbers(eigendecompose(SymmetricOperator(np.diag([0.0, 1.0]))), 1.0)
    assert cond.kappa_shift == pytest.approx(np.sqrt(2))
    assert cond.kappa_normal == pytest.approx(2.0)


def test_condition_identity_on_hilbert10():
    cond = condition_numbers(eigendecompose(SymmetricOperator(hilbert_matrix(10))), 1e-4)
    assert abs(cond.ratio_check - 1.0) <= 1e-8
    # matches the singular values of A + iaI computed directly
    s = np.linalg.svd(hilbert_matrix(10) + 1e-4j * np.eye(10), compute_uv=False)
    assert cond.kappa_shift == pytest.approx(s[0] / s[-1], rel=1e-6)


def test_condition_numbers_reject_nonpositive_shift():
    with pytest.raises(InputError):
        condition_numbers(eigendecompose(SymmetricOperator(np.eye(2))), 0.0)


def test_flop_model_dim_one():
    assert flop_model("shift", 1) == sum(flop_stages("shift", 1).values()) == 3
    assert flop_model("tikhonov", 1) == sum(flop_stages("tikhonov", 1).values()) == 5


def test_flop_model_is_cubic():
    for method in ("shift", "tikhonov"):
        ratio = flop_model(method, 512) / flop_model(method, 256)
        assert ratio == pytest.approx(8.0, rel=0.05)


def test_flop_model_monotone_and_tikhonov_larger():
    dims = [1, 2, 8, 64, 128, 512, 2000]
    for method in ("shift", "tikhonov"):
        counts = [flop_model(method, n) for n in dims]
        assert all(b > a for a, b in zip(counts, counts[1:]))
    assert all(flop_model("tikhonov", n) > flop_model("shift", n) for n in dims if n >= 64)


def test_flop_model_product_stage_accounts_for_difference():
    n = 512
    tik = flop_stages("tikhonov", n)
    assert "gram" in tik and "gram" not in flop_stages("shift", n)
    assert flop_model("tikhonov", n) - sum(v for k, v in tik.items() if k != "gram") == n ** 2 * (2 * n - 1)


def test_flop_model_complex_weight_scales_complex_stages_only():
    plain = flop_stages("shift", 100)
    weighted = flop_stages("shift", 100, complex_weight=4)
    assert weighted["factor_lu"] == 4 * plain["factor_lu"]
    assert weighted["assemble"] == plain["assemble"]
    assert flop_stages("tikhonov", 100, complex_weight=4) == flop_stages("tikhonov", 100)


def test_flop_model_unknown_method():
    with pytest.raises(InputError):
        flop_model("cgls", 10)


def test_compare_methods_on_hilbert10():
    H = SymmetricOperator(hilbert_matrix(10))
    y = H.entries @ np.ones(10)
    deltas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7]
    report = compare_methods(H, H.entries @ y, deltas, ShiftSchedule(), seed=0, y=y)
    shift_errors = report.column("shift_error")
    tikhonov_errors = report.column("tikhonov_error")
    assert shift_errors[-1] * 10 <= shift_errors[0]
    assert tikhonov_errors[-1] * 10 <= tikhonov_errors[0]
    assert_allclose(report.column("ratio_check"), 1.0, atol=1e-8)
    assert_allclose(report.column("alpha"), report.column("a") ** 2)
    assert all(r.tikhonov_flops > r.shift_flops for r in report.rows)


def test_compare_zero_delta_row_shrinks_with_shift():
    A = SymmetricOperator(np.diag([1.0, 2.0, 3.0]))
    y = np.ones(3)
    coarse = compare_methods(A, A.entries @ y, [0.0], ShiftSchedule(), seed=0, y=y, a_at_zero=1e-1).rows[0]
    fine = compare_methods(A, A.entries @ y, [0.0], ShiftSchedule(), seed=0, y=y, a_at_zero=1e-4).rows[0]
    assert fine.shift_error < coarse.shift_error
    assert fine.tikhonov_error < coarse.tikhonov_error
    assert fine.shift_error < 1e-3


def test_benchmark_reports_both_methods():
    reports = benchmark([4, 8], repeats=1)
    assert [(r.method, r.dim) for r in reports] == [
        ("shift", 4), ("tikhonov", 4), ("shift", 8), ("tikhonov", 8)
    ]
    assert all(r.modeled_flops == flop_model(r.method, r.dim) for r in reports)
    assert all(r.measured_seconds >= 0 for r in reports)


def test_benchmark_warns_unless_kernels_are_sequential(monkeypatch, caplog):
    for name in THREAD_ENV_VARS:
        monkeypatch.setenv(name, "1")
    with caplog.at_level(logging.WARNING, logger="shiftreg.bench"):
        benchmark([4], repeats=1)
    assert "not pinned" not in caplog.text

    monkeypatch.setenv("OMP_NUM_THREADS", "4")
    with caplog.at_level(logging.WARNING, logger="shiftreg.bench"):
        benchmark([4], repeats=1)
    assert "OMP_NUM_THREADS=4" in caplog.text
