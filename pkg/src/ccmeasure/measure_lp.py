"""Discrete-measure LP and the point-decision chance-constrained baseline.

The sample problem over ``S`` candidate decisions is

    min  c @ mu   s.t.  sum(mu) = 1,  q @ mu >= 1 - alpha,  mu >= 0

where ``c[i] = J(x_i)`` and ``q[i]`` is the empirical probability that
``x_i`` satisfies the constraint.  With two rows an optimal basic solution
has at most two positive weights, which :func:`pair_enumeration_oracle`
exploits to give an exact, independent check on the simplex result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError
from .simplex import lexicographic_refine, solve_standard_form

FEAS_TOL = 1e-12
AGREE_TOL = 1e-9


@dataclass(frozen=True)
class DiscreteMeasure:
    indices: tuple
    weights: tuple

    def __post_init__(self):
        idx = [int(i) for i in self.indices]
        w = [float(v) for v in self.weights]
        if len(idx) != len(w) or not idx:
            raise DomainError("measure needs one weight per support index")
        if len(set(idx)) != len(idx):
            raise DomainError("support indices must be distinct")
        if any(v <= 0 for v in w):
            raise DomainError("support weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-10:
            raise DomainError("support weights must sum to 1")
        order = np.argsort(idx, kind="stable")
        object.__setattr__(self, "indices", tuple(idx[k] for k in order))
        object.__setattr__(self, "weights", tuple(w[k] for k in order))

    @classmethod
    def from_dense(cls, mu, prune: float = 1e-14) -> "DiscreteMeasure":
        mu = np.asarray(mu, dtype=float)
        keep = np.flatnonzero(mu > prune)
        w = mu[keep] / mu[keep].sum()
        return cls(tuple(keep.tolist()), tuple(w.tolist()))

    def dense(self, S: int) -> np.ndarray:
        mu = np.zeros(S)
        mu[list(self.indices)] = self.weights
        return mu

    def __len__(self):
        return len(self.indices)


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible"
    objective: float = math.nan
    measure: Optional[DiscreteMeasure] = None
    active_constraint: bool = False
    alpha: float = math.nan
    diagnostics: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _validate(costs, q, alpha):
    c = np.asarray(costs, dtype=float)
    q = np.asarray(q, dtype=float)
    if c.ndim != 1 or c.shape != q.shape or c.size == 0:
        raise DomainError("costs and q must be nonempty vectors of equal length")
    if np.any(q < 0) or np.any(q > 1):
        raise DomainError("q must lie in [0, 1]")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError("alpha must be a probability")
    return c, q, 1.0 - alpha


def _finish(c, q, target, measure, alpha, **diag):
    mu = np.array(measure.weights)
    idx = list(measure.indices)
    obj = float(math.fsum(c[idx] * mu))
    sat = float(math.fsum(q[idx] * mu))
    tight = abs(sat - target) <= 1e-10
    return LpSolution("optimal", obj, measure, tight, alpha, diag)


def pair_enumeration_oracle(costs, q, alpha: float) -> LpSolution:
    """Exhaustive search over single points and tight mixing pairs.

    Singles are every ``i`` with ``q_i >= 1 - alpha``; pairs mix an ``i`` with
    ``q_i > 1 - alpha`` and a ``j`` with ``q_j < 1 - alpha`` at the weight that
    makes the constraint tight.  Among objective ties (within ``1e-12``
    relative) the lexicographically smallest sorted support wins.
    """
    c, q, t = _validate(costs, q, alpha)
    if q.max() < t - FEAS_TOL:
        return LpSolution("infeasible", alpha=alpha)
    singles = np.flatnonzero(q >= t - FEAS_TOL)
    hi = np.flatnonzero(q > t + FEAS_TOL)
    lo = np.flatnonzero(q < t - FEAS_TOL)

    best = float(c[singles].min())
    pair_obj = None
    if hi.size and lo.size:
        lam = (q[hi, None] - t) / (q[hi, None] - q[None, lo])  # weight on the low-q point
        pair_obj = (1.0 - lam) * c[hi, None] + lam * c[None, lo]
        best = min(best, float(pair_obj.min()))

    tie = 1e-12 * (1.0 + abs(best))
    candidates = []
    for i in singles[c[singles] <= best + tie]:
        candidates.append(((int(i),), (1.0,)))
    if pair_obj is not None:
        for a, b_ in zip(*np.nonzero(pair_obj <= best + tie)):
            i, j = int(hi[a]), int(lo[b_])
            w_j = float(lam[a, b_])
            sup = {i: 1.0 - w_j, j: w_j}
            candidates.append((tuple(sorted(sup)), tuple(sup[k] for k in sorted(sup))))
    candidates.sort(key=lambda z: z[0])
    idx, w = candidates[0]
    return _finish(c, q, t, DiscreteMeasure(idx, w), alpha, solver="pair-enumeration")


def solve_sample_lp_simplex(costs, q, alpha: float) -> LpSolution:
    c, q, t = _validate(costs, q, alpha)
    if q.max() < t - FEAS_TOL:
        return LpSolution("infeasible", alpha=alpha)
    S = c.size
    # columns: mu_0..mu_{S-1}, surplus of the chance row
    A = np.zeros((2, S + 1))
    A[0, :S] = 1.0
    A[1, :S] = q
    A[1, S] = -1.0
    b = np.array([1.0, t])
    cc = np.concatenate([c, [0.0]])
    res = solve_standard_form(cc, A, b)
    if res.status != "optimal":
        return LpSolution("infeasible", alpha=alpha, diagnostics={"simplex": res.status})
    basis = lexicographic_refine(cc, A, b, res.basis)
    xB = np.linalg.solve(A[:, basis], b)
    mu = np.zeros(S + 1)
    mu[basis] = np.clip(xB, 0.0, None)
    measure = DiscreteMeasure.from_dense(mu[:S])
    return _finish(c, q, t, measure, alpha, solver="revised-simplex", iterations=res.iterations)


def solve_sample_lp(costs, q, alpha: float, check: bool = __debug__) -> LpSolution:
    """Optimal discrete measure over the sampled decisions.

    Returns the revised-simplex solution.  With ``check`` set (the default
    unless Python runs with ``-O``) the pair-enumeration oracle is also run
    and the two objectives must agree within 1e-9.
    """
    sol = solve_sample_lp_simplex(costs, q, alpha)
    if check:
        ref = pair_enumeration_oracle(costs, q, alpha)
        if ref.status != sol.status or (sol.optimal and abs(ref.objective - sol.objective) > AGREE_TOL):
            raise AssertionError(
                f"simplex/oracle disagreement: {sol.status} {sol.objective!r} vs {ref.status} {ref.objective!r}"
            )
        sol.diagnostics["oracle_objective"] = ref.objective
    return sol


@dataclass
class BaselineSolution:
    status: str
    index: int = -1
    objective: float = math.nan
    q: float = math.nan

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_ccp_baseline(costs, sat, epsilon: float) -> BaselineSolution:
    """Cheapest sampled candidate whose empirical satisfaction is ``>= 1 - epsilon``.

    ``sat`` is a :class:`~ccmeasure.satisfaction.SatisfactionMatrix` built with
    the desired margin, or a plain vector of row probabilities.
    """
    q = np.asarray(getattr(sat, "q", sat), dtype=float)
    c = np.asarray(costs, dtype=float)
    if c.shape != q.shape:
        raise DomainError("costs and satisfaction rows differ in length")
    if not 0.0 <= epsilon < 1.0:
        raise DomainError("epsilon must lie in [0, 1)")
    feas = np.flatnonzero(q >= (1.0 - epsilon) - FEAS_TOL)
    if feas.size == 0:
        return BaselineSolution("infeasible")
    i = int(feas[np.argmin(c[feas])])  # argmin returns the first (smallest) index on ties
    return BaselineSolution("optimal", i, float(c[i]), float(q[i]))


@dataclass(frozen=True)
class FeasibilityBound:
    value: float
    vacuous: bool
    log_prefactor: float
    caveat: str = (
        "eta is not defined where this bound is stated; it is evaluated with eta = beta. "
        "Report only: this number does not certify feasibility."
    )


def feasibility_bound_report(n: int, L_lipschitz: float, D: float, N: int, epsilon: float, beta: float, gamma: float, alpha: float) -> FeasibilityBound:
    """Right-hand side ``1 - ceil(1/eta) ceil(2 L D / gamma)^n exp(-2 N (alpha - eps - beta)^2)``.

    Computed in log space so large ``n`` does not overflow.  Values at or below
    zero are clamped to 0 and flagged vacuous.
    """
    if not 0.0 <= epsilon < alpha < 1.0:
        raise DomainError("need 0 <= epsilon < alpha < 1")
    if not 0.0 < beta < alpha - epsilon:
        raise DomainError("need 0 < beta < alpha - epsilon")
    if gamma <= 0 or L_lipschitz <= 0 or D <= 0 or n < 1 or N < 0:
        raise DomainError("gamma, L, D must be positive; n >= 1; N >= 0")
    log_pref = math.log(math.ceil(1.0 / beta)) + n * math.log(math.ceil(2.0 * L_lipschitz * D / gamma))
    log_term = log_pref - 2.0 * N * (alpha - epsilon - beta) ** 2
    value = 1.0 - math.exp(log_term) if log_term < 700 else -math.inf
    if value <= 0.0:
        return FeasibilityBound(0.0, True, log_pref)
    return FeasibilityBound(value, False, log_pref)
