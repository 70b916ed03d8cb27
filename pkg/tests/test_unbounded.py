import logging

import numpy as np
import pytest
import scipy.linalg
from numpy.testing import assert_allclose

from shiftreg.errors import InputError
from shiftreg.operators import GeneralOperator, SymmetricOperator, make_noisy, null_projector
from shiftreg.problems import generate_problem, hilbert_matrix
from shiftreg.schemas import IterationSchedule, ProblemSpec
from shiftreg.unbounded import (
    bound_eq9,
    bound_eq9_curve,
    build_operators,
    evaluate_unbounded,
    evaluation_sweep,
    iterate_eq7,
    iterate_summed,
    iteration_history,
    schedule_n,
    tail_mass_eq10,
    verify_lemma1,
)


def test_build_operators_scalar():
    ops = build_operators(GeneralOperator(np.array([[2.0]])))
    assert_allclose(ops.Q, [[4.0]])
    assert_allclose(ops.T, [[4.0]])
    assert_allclose(ops.B, [[0.2]])
    assert_allclose(ops.F, [[0.4]])
    assert_allclose(ops.H, [[0.8]])


def test_build_operators_zero_operator():
    ops = build_operators(GeneralOperator(np.zeros((3, 3))))
    assert_allclose(ops.B, np.eye(3))
    assert_allclose(ops.F, np.zeros((3, 3)))
    assert_allclose(ops.H, np.zeros((3, 3)))
    assert verify_lemma1(ops) == 0.0


def test_lemma1_norm_attained_at_unit_singular_value(diag13):
    ops = build_operators(diag13)
    assert_allclose(ops.F, np.diag([0.5, 0.3]), atol=1e-15)
    assert verify_lemma1(ops) == pytest.approx(0.5, abs=1e-8)


def test_lemma1_norm_matches_singular_value_formula():
    A = GeneralOperator(hilbert_matrix(8))
    sigma = scipy.linalg.svdvals(A.entries)
    assert verify_lemma1(build_operators(A)) == pytest.approx(np.max(sigma / (1 + sigma ** 2)), rel=1e-10)


def test_lemma1_holds_on_random_and_rank_deficient(random_square, rank_deficient):
    for A in random_square + [rank_deficient.operator]:
        ops = build_operators(A)
        assert verify_lemma1(ops, strict=True) <= 0.5 + 1e-12
        assert ops.commutation_residual() <= 1e-10 * (1 + np.linalg.norm(ops.A.entries))


def test_spectrum_of_b_maps_singular_values(random_square, rank_deficient):
    for A in random_square[:5] + [rank_deficient.operator]:
        ops = build_operators(A)
        sigma = scipy.linalg.svdvals(ops.A.entries)
        assert_allclose(ops.B_decomp.eigenvalues, np.sort(1.0 / (1.0 + sigma ** 2)), atol=1e-10)


def test_fixed_point_subspace_is_null_space_of_adjoint(rank_deficient):
    ops = build_operators(rank_deficient.operator)
    P = null_projector(rank_deficient.operator, rank_tolerance=1e-10, which="N_star")
    u = P @ np.random.default_rng(2).standard_normal(ops.m)
    assert np.linalg.norm(u) > 0.1
    assert_allclose(ops.B @ u, u, atol=1e-12)
    assert_allclose(ops.H @ u, 0.0, atol=1e-12)


def test_iterate_scalar_geometric_series():
    ops = build_operators(GeneralOperator(np.array([[2.0]])))
    for n in (0, 1, 5, 50):
        assert_allclose(iterate_eq7(ops, [1.0], n), [2.0 * (1 - 0.8 ** n)], rtol=1e-13, atol=1e-15)


def test_iterate_zero_operator_stays_zero():
    ops = build_operators(GeneralOperator(np.zeros((2, 2))))
    assert_allclose(iterate_eq7(ops, [3.0, -1.0], 10), [0.0, 0.0])


def test_iterate_diag13_converges_to_af(diag13):
    ops = build_operators(diag13)
    v = iterate_eq7(ops, [1.0, 1.0], 200)
    assert np.linalg.norm(v - np.array([1.0, 3.0])) <= 1e-6


def test_iterate_matches_per_mode_closed_form(random_square):
    for A in random_square:
        ops = build_operators(A)
        f = np.random.default_rng(1).standard_normal(ops.n)
        U, sigma, Vh = np.linalg.svd(A.entries)
        af_coeffs = sigma * (Vh @ f)
        b = 1.0 / (1.0 + sigma ** 2)
        for n in (1, 5, 50):
            expected = af_coeffs * (1.0 - (1.0 - b) ** n)
            got = U.T @ iterate_eq7(ops, f, n)
            assert_allclose(got, expected, atol=1e-10 * (1 + np.linalg.norm(af_coeffs)))


def test_summed_form_equals_recursion():
    rng = np.random.default_rng(4)
    ops = build_operators(GeneralOperator(rng.standard_normal((6, 4))))
    f = rng.standard_normal(4)
    # start vector orthogonal to ker A^T
    v0 = (np.eye(6) - ops.P_nstar) @ rng.standard_normal(6)
    for n in (0, 1, 5, 20):
        recursive = iterate_eq7(ops, f, n, v0)
        summed = iterate_summed(ops, f, n, v0)
        assert_allclose(summed, recursive, atol=1e-10 * (1 + np.linalg.norm(recursive)))


def test_history_ends_at_final_iterate(diag13):
    ops = build_operators(diag13)
    target = np.array([1.0, 3.0])
    errors = iteration_history(ops, [1.0, 1.0], 30, target)
    assert errors.shape == (31,)
    assert errors[0] == pytest.approx(np.linalg.norm(target))
    assert errors[-1] == pytest.approx(np.linalg.norm(iterate_eq7(ops, [1.0, 1.0], 30) - target))
    assert np.all(np.diff(errors) <= 0)


def test_start_vector_in_adjoint_kernel_is_projected_with_warning(caplog):
    ops = build_operators(SymmetricOperator(np.diag([1.0, 0.0])))
    with caplog.at_level(logging.WARNING, logger="shiftreg.unbounded"):
        v = iterate_eq7(ops, [0.0, 0.0], 0, v0=[0.0, 1.0])
    assert_allclose(v, [0.0, 0.0], atol=1e-15)
    assert "not orthogonal" in caplog.text


def test_iterate_rejects_bad_counts_and_lengths(diag13):
    ops = build_operators(diag13)
    with pytest.raises(InputError):
        iterate_eq7(ops, [1.0, 1.0], -1)
    with pytest.raises(InputError):
        iterate_eq7(ops, [1.0, 1.0, 1.0], 3)


def test_schedule_n_examples():
    assert schedule_n(IterationSchedule(coefficient=1.0, exponent=0.5), 1e-4) == 100
    assert schedule_n(IterationSchedule(coefficient=1.0, exponent=0.5), 1.0) == 1
    with pytest.raises(InputError):
        schedule_n(IterationSchedule(), 0.0)


def test_schedule_n_rounds_up_large_counts():
    # C * delta^-q = 1e12 + 0.5 must not be pulled down to 1e12
    schedule = IterationSchedule(coefficient=1e12 + 0.5, exponent=0.5)
    assert schedule_n(schedule, 1.0) == 10 ** 12 + 1
    assert schedule_n(IterationSchedule(coefficient=1.0, exponent=0.5), 1e-8) == 10 ** 4


def test_bound_eq9_examples():
    ops = build_operators(GeneralOperator(np.array([[2.0]])))
    assert bound_eq9(ops, [1.0], 3, 0.1) == pytest.approx(0.662)
    assert bound_eq9(ops, [0.0], 7, 0.1) == pytest.approx(0.35)
    assert bound_eq9(ops, [-1.5], 0, 0.1) == pytest.approx(1.5)
    curve = bound_eq9_curve(ops, [1.0], 5, 0.1)
    assert curve[3] == pytest.approx(0.662)


def test_tail_mass_examples(diag13):
    ops = build_operators(diag13)
    assert tail_mass_eq10(ops, [1.0, 1.0], 0.2, 5) == pytest.approx(0.5 ** 10)

    singular = build_operators(SymmetricOperator(np.diag([1.0, 0.0])))
    assert tail_mass_eq10(singular, [0.0, 1.0], 0.9, 1) == pytest.approx(0.0, abs=1e-30)
    assert tail_mass_eq10(singular, [0.0, 1.0], 0.9, 0) == pytest.approx(1.0)
    with pytest.raises(InputError):
        tail_mass_eq10(singular, [0.0, 1.0], 1.0, 1)


def test_evaluate_zero_operator():
    A = GeneralOperator(np.zeros((3, 3)))
    report = evaluate_unbounded(A, [1.0, 2.0, 3.0], 1e-2, target=np.zeros(3))
    assert_allclose(report.v_delta, 0.0)
    assert report.error_vs_Af == 0.0
    assert report.bound_eq9 == pytest.approx(report.n_used * 1e-2 / 2)


def test_evaluate_without_target_has_no_error_fields(diag13):
    report = evaluate_unbounded(diag13, [1.0, 1.0], 1e-4)
    assert report.n_used == 100
    assert report.error_vs_Af is None
    assert report.bound_eq9 is None
    assert report.lemma1_norm == pytest.approx(0.5)


def test_evaluate_zero_delta_needs_n(diag13):
    with pytest.raises(InputError):
        evaluate_unbounded(diag13, [1.0, 1.0], 0.0)
    report = evaluate_unbounded(diag13, [1.0, 1.0], 0.0, n=200, target=[1.0, 3.0])
    assert report.error_vs_Af <= 1e-6


def test_fixed_point_identity_holds_for_exact_af():
    A = GeneralOperator(np.random.default_rng(8).standard_normal((5, 7)))
    ops = build_operators(A)
    f = np.random.default_rng(9).standard_normal(7)
    y = A.entries @ f
    assert np.linalg.norm(ops.B @ y - ops.F @ f) <= 1e-12 * (1 + np.linalg.norm(y))


def test_error_stays_under_bound_eq9_on_derivative(derivative_problem):
    ops = build_operators(derivative_problem.operator)
    target = derivative_problem.f
    tol = 1e-8 * (1 + np.linalg.norm(target))
    for delta in (1e-2, 1e-4):
        n_max = 10 * schedule_n(IterationSchedule(), delta)
        bounds = bound_eq9_curve(ops, -target, n_max, delta)
        f_delta = make_noisy(derivative_problem.y_exact, delta, 5).f_delta
        errors = iteration_history(ops, f_delta, n_max, target)
        assert np.all(errors <= bounds + tol)


def test_error_stays_under_bound_eq9_on_random_square(random_square):
    rng = np.random.default_rng(21)
    for A in random_square:
        ops = build_operators(A)
        y = rng.standard_normal(8)
        target = A.entries @ y
        tol = 1e-8 * (1 + np.linalg.norm(target))
        for delta in (1e-2, 1e-4):
            n_max = 10 * schedule_n(IterationSchedule(), delta)
            bounds = bound_eq9_curve(ops, -target, n_max, delta)
            errors = iteration_history(ops, make_noisy(y, delta, 2).f_delta, n_max, target)
            assert np.all(errors <= bounds + tol)


def test_derivative_sweep_error_decreases(derivative_problem):
    deltas = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
    rows = evaluation_sweep(derivative_problem.operator, derivative_problem.y_exact, deltas,
                            IterationSchedule(), seed=0)
    errors = [r.error for r in rows]
    assert [r.n_used for r in rows] == [10, 32, 100, 317, 1000]
    assert all(later < earlier for earlier, later in zip(errors, errors[1:]))
    assert all(r.within_bound for r in rows)


def test_derivative_error_drops_tenfold_when_derivative_vanishes_at_ends():
    # f = sin^2(pi x) has f' = pi sin(2 pi x), zero at both ends
    x = np.arange(65) / 64
    spec = ProblemSpec(kind="first_derivative_rect", dim=64, exact_solution=list(np.sin(np.pi * x) ** 2))
    problem = generate_problem(spec)
    rows = evaluation_sweep(problem.operator, problem.y_exact, [1e-2, 1e-6], IterationSchedule(), seed=0)
    assert rows[1].error * 10 <= rows[0].error


def test_evaluation_sweep_rejects_zero_delta(derivative_problem):
    with pytest.raises(InputError):
        evaluation_sweep(derivative_problem.operator, derivative_problem.y_exact, [1e-2, 0.0],
                         IterationSchedule(), seed=0)


@pytest.mark.filterwarnings("error::DeprecationWarning")
def test_evaluation_rows_carry_plain_bool_flags(derivative_problem):
    rows = evaluation_sweep(derivative_problem.operator, derivative_problem.y_exact, [1e-2, 1e-3],
                            IterationSchedule(), seed=0)
    assert all(type(row.within_bound) is bool for row in rows)
