"""Dense revised simplex for ``min c x  s.t.  A x = b, x >= 0``.

Two-phase method with Bland's smallest-index rule for both the entering and
the leaving variable, which rules out cycling on degenerate pivots.  The basis
inverse is recomputed from scratch each iteration; the LPs solved here have a
handful of rows, so a factorization update would buy nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

TOL = 1e-11


@dataclass
class SimplexResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: np.ndarray
    objective: float
    basis: list
    iterations: int


def _iterate(A, b, c, basis, allowed, max_iter):
    """Bland-rule primal simplex from a feasible ``basis``.  Mutates ``basis``."""
    m, n = A.shape
    it = 0
    while it < max_iter:
        it += 1
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        scale = 1.0 + np.max(np.abs(c))
        eligible = allowed & (reduced < -TOL * scale)
        eligible[basis] = False
        hits = np.flatnonzero(eligible)
        if hits.size == 0:
            return "optimal", xB, it
        entering = int(hits[0])
        d = np.linalg.solve(B, A[:, entering])
        ratios = []
        for r in range(m):
            if d[r] > TOL:
                ratios.append((xB[r] / d[r], basis[r], r))
        if not ratios:
            return "unbounded", xB, it
        best = min(t for t, _, _ in ratios)
        # Bland: among tied minimum ratios leave the smallest variable index
        cand = [(var, r) for t, var, r in ratios if t <= best + TOL * (1.0 + abs(best))]
        _, leave_row = min(cand)
        basis[leave_row] = entering
    raise RuntimeError("simplex iteration limit reached")


def solve_standard_form(c, A, b, max_iter: int = 10_000) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float)).copy()
    b = np.asarray(b, dtype=float).copy()
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1

    # phase 1: artificial identity block appended after the structural columns
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    allowed = np.ones(n + m, dtype=bool)
    status, xB, it1 = _iterate(A1, b, c1, basis, allowed, max_iter)
    phase1 = float(c1[basis] @ xB)
    if phase1 > 1e-9 * (1.0 + np.abs(b).max()):
        return SimplexResult("infeasible", np.full(n, np.nan), np.nan, basis, it1)

    # drive zero-level artificials out of the basis where a structural column can replace them
    for r in range(m):
        if basis[r] >= n:
            B = A1[:, basis]
            row = np.linalg.solve(B.T, np.eye(m)[r])
            for j in range(n):
                if j not in basis and abs(row @ A[:, j]) > 1e-9:
                    basis[r] = j
                    break
    # redundant rows keep their artificial; it stays at zero because it may never re-enter
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    c2 = np.concatenate([c, np.zeros(m)])
    status, xB, it2 = _iterate(A1, b, c2, basis, allowed, max_iter)
    x = np.zeros(n + m)
    x[basis] = xB
    x = x[:n]
    x[np.abs(x) < 1e-14] = 0.0
    if status == "unbounded":
        return SimplexResult(status, x, -np.inf, basis, it1 + it2)
    return SimplexResult("optimal", x, float(c @ x), basis, it1 + it2)


def lexicographic_refine(c, A, b, basis, max_rounds: int = 1000):
    """Walk alternative optimal bases toward the lexicographically smallest support.

    Starting from an optimal ``basis``, repeatedly pivot in any nonbasic column
    with zero reduced cost when the resulting basic solution has a
    lexicographically smaller sorted support.  Terminates because each accepted
    pivot strictly decreases the support in lexicographic order.
    """
    c = np.asarray(c, float)
    A = np.atleast_2d(np.asarray(A, float))
    b = np.asarray(b, float)
    m, n = A.shape
    basis = list(basis)

    def support(bs):
        xB = np.linalg.solve(A[:, bs], b)
        return tuple(sorted(v for v, val in zip(bs, xB) if val > 1e-13 and v < n)), xB

    if any(v >= n for v in basis):
        return basis
    cur, _ = support(basis)
    for _ in range(max_rounds):
        B = A[:, basis]
        xB = np.linalg.solve(B, b)
        y = np.linalg.solve(B.T, c[basis])
        reduced = c - A.T @ y
        scale = 1.0 + np.max(np.abs(c))
        improved = False
        zero = np.abs(reduced[:n]) <= TOL * scale
        zero[[v for v in basis if v < n]] = False
        for j in np.flatnonzero(zero):
            d = np.linalg.solve(B, A[:, j])
            ratios = [(xB[r] / d[r], basis[r], r) for r in range(m) if d[r] > TOL]
            if not ratios:
                continue
            best = min(t for t, _, _ in ratios)
            for t, var, r in sorted(ratios, key=lambda z: (z[0], z[1])):
                if t > best + TOL * (1.0 + abs(best)):
                    break
                trial = list(basis)
                trial[r] = j
                try:
                    sup, xt = support(trial)
                except np.linalg.LinAlgError:
                    continue
                if np.any(xt < -1e-12):
                    continue
                if sup < cur:
                    basis, cur, improved = trial, sup, True
                    break
            if improved:
                break
        if not improved:
            return basis
    return basis
