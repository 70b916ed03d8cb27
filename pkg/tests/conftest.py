# tests/conftest.py
import numpy as np
import pytest

from shiftreg.operators import GeneralOperator, SymmetricOperator
from shiftreg.problems import generate_problem
from shiftreg.schemas import ProblemSpec


@pytest.fixture()
def hilbert6():
    return generate_problem(ProblemSpec(kind="hilbert", dim=6))


@pytest.fixture()
def derivative_problem():
    # 64 x 65 forward differences, f = sin(2 pi x) on the 65 grid points
    return generate_problem(ProblemSpec(kind="first_derivative_rect", dim=64))


@pytest.fixture()
def rank_deficient():
    return generate_problem(ProblemSpec(kind="rank_deficient_sym", dim=8, null_dim=2, seed=3))


@pytest.fixture()
def random_square():
    rng = np.random.default_rng(11)
    return [GeneralOperator(rng.standard_normal((8, 8))) for _ in range(20)]


@pytest.fixture()
def diag13():
    return SymmetricOperator(np.diag([1.0, 3.0]))
