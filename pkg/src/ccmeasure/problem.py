"""Problem abstraction, policy artifacts and the problem registry.

A :class:`Problem` carries a cost ``J(x)``, a vector constraint ``h(x, delta)``,
a decision box, a scenario model for ``delta`` and the probability level
``alpha``.  Both functions are written against numpy broadcasting: ``cost_fn``
maps ``(..., n) -> (...)`` and ``constraint_fn`` maps ``(..., n), (..., s) ->
(..., m)``.  That one convention serves single-point evaluation, the S x N
satisfaction matrix and paired (x_k, delta_k) validation trials alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import ndtr

from .errors import DomainError

BOX_TOL = 1e-12


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DomainError("box bounds must be 1-d vectors of equal length")
        if not np.all(lo < hi):
            raise DomainError("box requires lower < upper in every coordinate")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def n(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def diameter(self) -> float:
        """Infinity-norm diameter, ``max_i (upper_i - lower_i)``."""
        return float(np.max(self.width))

    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, x, tol: float = BOX_TOL) -> np.ndarray:
        """Row-wise containment test; ``x`` has shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower - tol) & (x <= self.upper + tol), axis=-1)

    @classmethod
    def cube(cls, lo: float, hi: float, n: int) -> "Box":
        return cls(np.full(n, lo), np.full(n, hi))


@dataclass(frozen=True, eq=False)
class Problem:
    """Chance-constrained program ``min E_mu[J]`` s.t. ``Pr{h <= 0} >= 1 - alpha``.

    ``count_fn(X, D, gamma)``, when given, must return the same integer row
    counts as brute-force indicator evaluation; it exists so that problems
    with cheap structure (monotone thresholds) avoid the S x N evaluation.
    ``scenario_cost_fn(X, D)`` gives the realized cost under one scenario for
    problems whose ``cost_fn`` is itself an expectation.
    """

    id: str
    n: int
    s: int
    m: int
    box: Box
    alpha: float
    cost_fn: Callable[[np.ndarray], np.ndarray]
    constraint_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    scenario_model: object
    count_fn: Optional[Callable] = None
    scenario_cost_fn: Optional[Callable] = None
    exact_prob_fn: Optional[Callable] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.box.n != self.n:
            raise DomainError("box dimension does not match n")

    def with_alpha(self, alpha: float) -> "Problem":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw["alpha"] = alpha
        return Problem(**kw)

    def _check_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.n,):
            raise DomainError(f"decision must have trailing dimension {self.n}, got shape {x.shape}")
        if not np.all(self.box.contains(x)):
            raise DomainError("decision lies outside the problem box")
        return x

    def eval_cost(self, x) -> float:
        x = self._check_x(np.atleast_1d(x))
        return float(self.cost_fn(x))

    def eval_constraint(self, x, delta) -> np.ndarray:
        x = self._check_x(np.atleast_1d(x))
        delta = np.atleast_1d(np.asarray(delta, dtype=float))
        if delta.shape != (self.s,):
            raise DomainError(f"scenario must have length {self.s}, got shape {delta.shape}")
        return np.asarray(self.constraint_fn(x, delta), dtype=float).reshape(self.m)

    def costs(self, X) -> np.ndarray:
        """Vectorized cost over the rows of ``X``."""
        return np.asarray(self.cost_fn(self._check_x(np.atleast_2d(X))), dtype=float)

    def satisfied_pairs(self, X, D, gamma: float = 0.0) -> np.ndarray:
        """Joint satisfaction for paired rows ``(X[k], D[k])``."""
        h = np.asarray(self.constraint_fn(np.asarray(X, float), np.asarray(D, float)))
        return np.all(h + gamma <= 0.0, axis=-1)

    def realized_costs(self, X, D) -> np.ndarray:
        if self.scenario_cost_fn is None:
            return np.asarray(self.cost_fn(np.asarray(X, float)), dtype=float)
        return np.asarray(self.scenario_cost_fn(np.asarray(X, float), np.asarray(D, float)), dtype=float)


def is_satisfied(hval, gamma: float = 0.0) -> bool:
    """True iff every component of ``hval + gamma`` is ``<= 0``."""
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    return bool(np.all(np.asarray(hval, dtype=float) + gamma <= 0.0))


# -- policy artifacts ------------------------------------------------------


@dataclass(frozen=True)
class PointPolicy:
    x: np.ndarray
    kind: str = field(default="point", init=False)

    def __post_init__(self):
        object.__setattr__(self, "x", np.atleast_1d(np.asarray(self.x, dtype=float)))


@dataclass(frozen=True)
class DiscretePolicy:
    """Discrete measure over decision points.

    ``indices`` refer to the decision sample set the measure was solved on and
    are kept for traceability only; ``points`` holds the support itself.
    """

    indices: tuple
    weights: np.ndarray
    points: np.ndarray
    kind: str = field(default="discrete", init=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if w.ndim != 1 or w.size != pts.shape[0] or w.size != len(self.indices):
            raise DomainError("discrete policy needs one weight and one point per support index")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-10:
            raise DomainError("discrete policy weights must be positive and sum to 1")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


@dataclass(frozen=True)
class GmmPolicy:
    params: object  # ccmeasure.gmm.GmmParams; typed loosely to avoid an import cycle
    kind: str = field(default="gmm", init=False)


# -- benchmark problems ----------------------------------------------------


def toy_cost(x):
    x = np.asarray(x, dtype=float)
    return -((x[..., 0] + 0.6) ** 2) + 2.0


def toy_constraint(x, delta):
    x = np.asarray(x, dtype=float)
    delta = np.asarray(delta, dtype=float)
    return (x[..., 0] ** 2 + delta[..., 0] - 2.0)[..., None]


def toy_counts(X, D, gamma=0.0):
    # h <= -gamma  <=>  delta <= 2 - x^2 - gamma, so counts are a sorted search
    d = np.sort(np.asarray(D, dtype=float)[:, 0])
    thresh = 2.0 - np.asarray(X, dtype=float)[:, 0] ** 2 - gamma
    return np.searchsorted(d, thresh, side="right").astype(np.int64)


def exact_prob_toy1d(x) -> np.ndarray:
    """``Pr{x^2 + delta - 2 <= 0}`` for standard normal ``delta``, i.e. ``Phi(2 - x^2)``."""
    x = np.asarray(x, dtype=float)
    return ndtr(2.0 - x**2)


def make_toy1d(alpha: float = 0.05) -> Problem:
    from .sampling import Normal

    return Problem(
        id="toy1d",
        n=1,
        s=1,
        m=1,
        box=Box([-1.0], [1.0]),
        alpha=alpha,
        cost_fn=toy_cost,
        constraint_fn=toy_constraint,
        scenario_model=Normal(0.0, 1.0),
        count_fn=toy_counts,
        exact_prob_fn=lambda X: exact_prob_toy1d(np.asarray(X)[..., 0]),
    )


def _make_quadrotor(alpha: float = 0.15, **kw) -> Problem:
    from .quadrotor import QuadrotorSpec, as_problem

    return as_problem(QuadrotorSpec(**kw), alpha=alpha)


_REGISTRY = {
    "toy1d": make_toy1d,
    "quadrotor": _make_quadrotor,
}


def list_problems():
    return sorted(_REGISTRY)


def get_problem(problem_id: str, **kwargs) -> Problem:
    try:
        factory = _REGISTRY[problem_id]
    except KeyError:
        raise DomainError(f"unknown problem {problem_id!r}; known: {', '.join(list_problems())}") from None
    return factory(**kwargs)
