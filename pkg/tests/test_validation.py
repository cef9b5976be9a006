import numpy as np
import pytest
from scipy.stats import norm

from ccmeasure import DomainError, RngStream
from ccmeasure.problem import DiscretePolicy, PointPolicy, make_toy1d
from ccmeasure.sampling import VALIDATION_STREAM
from ccmeasure.validation import ValidationReport, compare_policies, validate_policy, wilson_interval

V = RngStream(0, VALIDATION_STREAM)


def test_point_policy_violation(toy):
    r = validate_policy(PointPolicy([0.0]), toy, 10_000, V)
    assert abs(r.violation_rate - (1 - norm.cdf(2))) <= 0.01
    assert r.violation_rate == r.violations / r.M_val
    assert r.ci_low <= r.violation_rate <= r.ci_high
    assert r.exact_cost == pytest.approx(1.64)


def test_discrete_policy_violation_and_cost(toy):
    pol = DiscretePolicy((0, 1), np.array([0.5, 0.5]), np.array([[0.0], [1.0]]))
    r = validate_policy(pol, toy, 10_000, V)
    assert abs(r.violation_rate - (1 - (norm.cdf(2) + norm.cdf(1)) / 2)) <= 0.012
    assert abs(r.expected_cost - r.exact_cost) <= 3 * r.cost_stderr


def test_alpha_near_one_report_is_well_formed():
    toy = make_toy1d(alpha=0.999)
    r = validate_policy(PointPolicy([1.0]), toy, 500, V)
    assert 0 <= r.ci_low <= r.violation_rate <= r.ci_high <= 1
    with pytest.raises(DomainError):
        validate_policy(PointPolicy([1.0]), toy, 0, V)


def test_reproducible(toy):
    a = validate_policy(PointPolicy([0.3]), toy, 2000, V)
    b = validate_policy(PointPolicy([0.3]), toy, 2000, V)
    assert a == b


def test_wilson_coverage():
    rng = np.random.default_rng(7)
    hits = 0
    for _ in range(500):
        p = rng.uniform(0.01, 0.3)
        k = rng.binomial(400, p)
        lo, hi = wilson_interval(int(k), 400)
        hits += lo <= p <= hi
    assert hits / 500 >= 0.93


def test_wilson_edges():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(100, 100)
    assert hi == 1.0 and lo > 0.95


def _rep(method, kind, obj, viol=0.05, pid="toy1d", M=1000):
    return ValidationReport(kind, pid, M, int(viol * M), viol, viol - 0.01, viol + 0.01, obj, 0.0, 0, 1, method, obj)


def test_compare_identical_reports():
    t = compare_policies([_rep("a", "point", 0.6), _rep("a", "point", 0.6)])
    assert all(r["delta_objective"] == 0 and r["delta_violation"] == 0 for r in t.rows)
    assert t.ordering_pass is None


def test_compare_ordering_and_csv():
    t = compare_policies([_rep("baseline", "point", 0.6076), _rep("sample_lp", "discrete", 0.56), _rep("gmm", "gmm", 0.57)])
    assert t.ordering_pass is True
    lines = t.to_csv().splitlines()
    assert lines[0].split(",")[:5] == ["method", "policy_kind", "problem", "M_val", "objective"]
    assert len(lines) == 4
    bad = compare_policies([_rep("baseline", "point", 0.5), _rep("sample_lp", "discrete", 0.56)])
    assert bad.ordering_pass is False


def test_compare_rejects_mixed_problems():
    with pytest.raises(DomainError):
        compare_policies([_rep("a", "point", 1.0), _rep("b", "point", 1.0, pid="quadrotor")])
    with pytest.raises(DomainError):
        compare_policies([])
