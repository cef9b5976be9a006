import json
import math

import numpy as np
from hypothesis import given, strategies as st

from ccmeasure.gmm import GmmParams
from ccmeasure.problem import DiscretePolicy, GmmPolicy, PointPolicy
from ccmeasure.serialize import dumps, policy_from_dict, policy_to_dict


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(x):
    assert json.loads(dumps({"x": x}))["x"] == x


def test_non_finite_becomes_null():
    assert json.loads(dumps({"a": math.nan, "b": [1.0, math.inf]})) == {"a": None, "b": [1.0, None]}


def test_keys_sorted_and_stable():
    a = dumps({"b": 1, "a": {"y": [1, 2], "x": "s"}})
    assert a == dumps({"a": {"x": "s", "y": [1, 2]}, "b": 1})
    assert a.index('"a"') < a.index('"b"')


def test_policy_roundtrip():
    pols = [
        PointPolicy([0.25]),
        DiscretePolicy((3, 9), np.array([0.3, 0.7]), np.array([[0.1], [0.2]])),
        GmmPolicy(GmmParams(np.array([0.4, 0.6]), np.array([[0.1], [-0.3]]), np.array([[[0.2]], [[0.05]]]))),
    ]
    for p in pols:
        back = policy_from_dict(json.loads(dumps(policy_to_dict(p))))
        assert policy_to_dict(back) == policy_to_dict(p)
