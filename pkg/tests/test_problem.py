import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import norm

from ccmeasure import Box, DomainError, get_problem, list_problems
from ccmeasure.problem import DiscretePolicy, PointPolicy, exact_prob_toy1d, is_satisfied


def test_box_invariants():
    b = Box([-1.0, 0.0], [1.0, 3.0])
    assert b.n == 2 and b.diameter() == 3.0 and b.volume() == 6.0
    assert b.contains([[0, 0], [1.5, 1]]).tolist() == [True, False]
    with pytest.raises(DomainError):
        Box([1.0], [1.0])


@pytest.mark.parametrize("x, expected", [(0.595, 0.572), (-0.6, 2.0), (1.0, -0.56)])
def test_toy_cost(toy, x, expected):
    assert toy.eval_cost([x]) == pytest.approx(expected, abs=5e-4)


@pytest.mark.parametrize("x, d, expected", [(0, 0, -2.0), (1, 1, 0.0), (0.595, 0, -1.645975)])
def test_toy_constraint(toy, x, d, expected):
    np.testing.assert_allclose(toy.eval_constraint([x], [d]), [expected], atol=1e-12)


def test_out_of_box_is_domain_error(toy):
    with pytest.raises(DomainError):
        toy.eval_cost([1.5])


def test_is_satisfied_examples():
    assert is_satisfied([-2.0], 0.0)
    assert is_satisfied([0.0], 0.0)
    assert not is_satisfied([-0.005], 0.01)


@given(st.floats(-5, 5), st.floats(0, 1), st.floats(0, 1))
def test_is_satisfied_monotone_in_gamma(h, g1, g2):
    lo, hi = sorted((g1, g2))
    if is_satisfied([h], hi):
        assert is_satisfied([h], lo)


@given(st.floats(-1, 1), st.floats(-4, 4))
def test_evaluation_is_repeatable(x, d):
    toy = get_problem("toy1d")
    assert toy.eval_cost([x]) == toy.eval_cost([x])
    assert np.array_equal(toy.eval_constraint([x], [d]), toy.eval_constraint([x], [d]))


def test_exact_probability():
    assert exact_prob_toy1d(0.0) == pytest.approx(norm.cdf(2.0), abs=1e-15)
    assert exact_prob_toy1d(0.5958) == pytest.approx(0.95, abs=1e-4)
    assert exact_prob_toy1d(np.sqrt(12.0)) < 1e-22


def test_registry():
    assert list_problems() == ["quadrotor", "toy1d"]
    with pytest.raises(DomainError):
        get_problem("nope")
    with pytest.raises(DomainError):
        get_problem("toy1d", alpha=1.0)


def test_policy_invariants():
    with pytest.raises(DomainError):
        DiscretePolicy((0, 1), np.array([0.5, 0.6]), np.zeros((2, 1)))
    with pytest.raises(DomainError):
        DiscretePolicy((0,), np.array([0.0]), np.zeros((1, 1)))
    assert PointPolicy([0.2]).x.shape == (1,)
