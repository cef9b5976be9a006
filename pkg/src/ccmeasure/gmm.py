"""Gaussian-mixture policies optimized by penalized direct search.

The decision measure is restricted to a mixture of ``L`` Gaussians,
conditioned on the decision box.  Its objective ``E[J(x)]`` and chance
``E[q_N(x)]`` are Monte Carlo averages over box-conditioned draws; the draws
come from a fixed stream for every evaluation (common random numbers), which
makes the penalized objective a deterministic function of the parameters.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, logit, logsumexp

from .errors import DegenerateSupportError, DomainError, GmmSolveError
from .problem import Box, Problem
from .sampling import GMM_STREAM, RngStream, ScenarioSampleSet
from .satisfaction import row_counts

log = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-3
WARMUP_DRAWS = 1000
FEAS_SLACK = 0.005


@dataclass(frozen=True, eq=False)
class GmmParams:
    weights: np.ndarray
    means: np.ndarray
    cov_factors: np.ndarray

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        m = np.atleast_2d(np.asarray(self.means, dtype=float))
        F = np.asarray(self.cov_factors, dtype=float)
        if F.ndim == 2:
            F = F[None]
        L, n = m.shape
        if w.shape != (L,) or F.shape != (L, n, n):
            raise DomainError("mixture parameter shapes disagree on L or n")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-10:
            raise DomainError("mixture weights must be nonnegative and sum to 1")
        if np.any(np.triu(F, 1) != 0):
            raise DomainError("covariance factors must be lower triangular")
        if np.any(np.diagonal(F, axis1=1, axis2=2) <= 0):
            raise DomainError("covariance factor diagonals must be positive")
        for a in (w, m, F):
            a.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "cov_factors", F)

    @property
    def L(self) -> int:
        return self.weights.size

    @property
    def n(self) -> int:
        return self.means.shape[1]

    def covariances(self) -> np.ndarray:
        return self.cov_factors @ np.swapaxes(self.cov_factors, 1, 2)

    @classmethod
    def from_covariances(cls, weights, means, covs) -> "GmmParams":
        covs = np.asarray(covs, dtype=float)
        if covs.ndim == 2:
            covs = covs[None]
        return cls(weights, means, np.linalg.cholesky(covs))

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covariances": self.covariances().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GmmParams":
        p = cls.from_covariances(d["weights"], d["means"], d["covariances"])
        if int(d.get("L", p.L)) != p.L:
            raise DomainError("GMM record: L does not match the number of weights")
        return p


def gmm_pdf(params: GmmParams, x) -> np.ndarray:
    """Mixture density on all of R^n (no box conditioning); ``x`` is ``(..., n)``."""
    x = np.asarray(x, dtype=float)
    n = params.n
    flat = x.reshape(-1, n)
    logs = []
    for w, m, F in zip(params.weights, params.means, params.cov_factors):
        if w == 0:
            continue
        z = np.linalg.solve(F, (flat - m).T)
        logdet = np.sum(np.log(np.diag(F)))
        logs.append(math.log(w) - 0.5 * np.sum(z * z, axis=0) - logdet - 0.5 * n * math.log(2 * math.pi))
    return np.exp(logsumexp(np.stack(logs), axis=0)).reshape(x.shape[:-1])


def sample_gmm(params: GmmParams, M: int, stream: RngStream, box: Box):
    """``M`` box-conditioned draws by rejection, plus the acceptance rate.

    Batch sizes depend only on ``M`` so that a fixed stream maps the same
    uniforms and normals to every parameter value.
    """
    if M < 1:
        raise DomainError("M must be at least 1")
    rng = stream.generator()
    n, L = params.n, params.L
    cdf = np.cumsum(params.weights)
    batch = max(M, WARMUP_DRAWS)
    limit = int(M / MIN_ACCEPTANCE) + WARMUP_DRAWS
    kept, n_kept, drawn = [], 0, 0
    while n_kept < M:
        u = rng.random(batch)
        z = rng.standard_normal((batch, n))
        comp = np.minimum(np.searchsorted(cdf, u * cdf[-1], side="right"), L - 1)
        x = params.means[comp] + np.einsum("kij,kj->ki", params.cov_factors[comp], z)
        inside = box.contains(x, tol=0.0)
        need = M - n_kept
        pos = np.flatnonzero(inside)
        if pos.size >= need:
            drawn += int(pos[need - 1]) + 1
            kept.append(x[pos[:need]])
            n_kept = M
            break
        kept.append(x[pos])
        n_kept += pos.size
        drawn += batch
        if drawn >= WARMUP_DRAWS and n_kept / drawn < MIN_ACCEPTANCE or drawn >= limit:
            raise DegenerateSupportError(n_kept / drawn)
    rate = M / drawn
    if rate < MIN_ACCEPTANCE:
        raise DegenerateSupportError(rate)
    return np.concatenate(kept, axis=0), rate


def estimate_objective(params: GmmParams, problem: Problem, M: int, stream: RngStream) -> float:
    X, _ = sample_gmm(params, M, stream, problem.box)
    return float(np.mean(problem.cost_fn(X)))


def estimate_chance(params: GmmParams, problem: Problem, scenarios: ScenarioSampleSet, M: int, stream: RngStream) -> float:
    X, _ = sample_gmm(params, M, stream, problem.box)
    counts = row_counts(problem, X, scenarios.scenarios)
    return int(counts.sum()) / (M * len(scenarios))


def estimate_both(params, problem, scenarios, M, stream):
    """Objective and chance from one shared draw, plus the acceptance rate."""
    X, rate = sample_gmm(params, M, stream, problem.box)
    obj = float(np.mean(problem.cost_fn(X)))
    chance = int(row_counts(problem, X, scenarios.scenarios).sum()) / (M * len(scenarios))
    return obj, chance, rate


# -- unconstrained reparameterization --------------------------------------

_EDGE = 1e-12


def encode(params: GmmParams, box: Box, diagonal: bool = False) -> np.ndarray:
    """Map parameters to an unconstrained vector.

    Layout: log-weights (L), logit-scaled means (L*n), then per component the
    log of the factor diagonal (n) followed, unless ``diagonal``, by the
    strictly lower entries in row-major order.
    """
    L, n = params.L, params.n
    logw = np.log(np.maximum(params.weights, 1e-300))
    frac = np.clip((params.means - box.lower) / box.width, _EDGE, 1 - _EDGE)
    parts = [logw, logit(frac).ravel()]
    rows, cols = np.tril_indices(n, -1)
    for F in params.cov_factors:
        parts.append(np.log(np.diag(F)))
        if not diagonal:
            parts.append(F[rows, cols])
    return np.concatenate(parts)


def decode(theta, L: int, n: int, box: Box, diagonal: bool = False) -> GmmParams:
    theta = np.asarray(theta, dtype=float)
    k = 0
    logw = theta[k : k + L]
    k += L
    w = np.exp(logw - logsumexp(logw))
    w /= w.sum()
    means = box.lower + box.width * expit(theta[k : k + L * n].reshape(L, n))
    k += L * n
    rows, cols = np.tril_indices(n, -1)
    F = np.zeros((L, n, n))
    for l in range(L):
        F[l][np.diag_indices(n)] = np.exp(theta[k : k + n])
        k += n
        if not diagonal:
            F[l][rows, cols] = theta[k : k + rows.size]
            k += rows.size
    if k != theta.size:
        raise DomainError(f"parameter vector has length {theta.size}, expected {k}")
    return GmmParams(w, means, F)


# -- solver ----------------------------------------------------------------


@dataclass(frozen=True)
class GmmSolveConfig:
    mc_samples: int = 2000
    penalty_initial: float = 1e4
    penalty_growth: float = 10.0
    restarts: int = 4
    max_iterations: int = 3000
    tolerance: float = 1e-3
    stream: RngStream = field(default_factory=lambda: RngStream(0, GMM_STREAM))
    max_penalty_rounds: int = 6
    simplex_step: float = 0.5
    nm_restarts: int = 3
    diagonal: bool = False
    init_scale: float = 0.1

    def __post_init__(self):
        for name in ("mc_samples", "penalty_initial", "restarts", "max_iterations", "tolerance", "max_penalty_rounds", "nm_restarts", "simplex_step", "init_scale"):
            if not getattr(self, name) > 0:
                raise DomainError(f"GmmSolveConfig.{name} must be positive")
        if not self.penalty_growth > 1:
            raise DomainError("penalty_growth must exceed 1")


@dataclass
class GmmResult:
    params: GmmParams
    objective: float
    chance: float
    acceptance_rate: float
    restart: int
    penalty: float
    history: list = field(default_factory=list)


def initial_params(box: Box, L: int, rng: np.random.Generator, scale: float = 0.1) -> GmmParams:
    """Uniform means, equal weights, ``(scale * width)`` standard deviations."""
    means = box.lower + box.width * rng.random((L, box.n))
    F = np.repeat(np.diag(scale * box.width)[None], L, axis=0)
    return GmmParams(np.full(L, 1.0 / L), means, F)


def solve_gmm(
    problem: Problem,
    scenarios: ScenarioSampleSet,
    L: int,
    config: GmmSolveConfig = GmmSolveConfig(),
    init: Optional[Sequence[GmmParams]] = None,
) -> GmmResult:
    """Penalized Nelder-Mead over mixture parameters, best of several restarts.

    Each restart minimizes ``obj + rho * max(0, 1 - alpha - chance)^2`` and
    multiplies ``rho`` by ``penalty_growth`` until the chance deficit is at
    most ``tolerance``.  The cheapest restart whose chance is within 0.005 of
    ``1 - alpha`` wins.  ``init`` supplies explicit starting points; when
    omitted, starts are drawn with :func:`initial_params`.
    """
    if L < 1:
        raise DomainError("L must be at least 1")
    box, n = problem.box, problem.n
    target = 1.0 - problem.alpha
    M, stream = config.mc_samples, config.stream

    starts = list(init) if init is not None else []
    for r in range(len(starts), config.restarts):
        rng = stream.substream(1000 + r).generator()
        starts.append(initial_params(box, L, rng, config.init_scale))

    results = []
    for r, p0 in enumerate(starts):
        Lr = p0.L
        theta = encode(p0, box, config.diagonal)
        cache = {}

        def evaluate(th):
            key = th.tobytes()
            if key not in cache:
                try:
                    cache[key] = estimate_both(decode(th, Lr, n, box, config.diagonal), problem, scenarios, M, stream)
                except DegenerateSupportError:
                    cache[key] = (math.inf, 0.0, 0.0)
            return cache[key]

        rho = config.penalty_initial
        history = []
        for _round in range(config.max_penalty_rounds):

            def penalized(th, rho=rho):
                obj, ch, _ = evaluate(th)
                return obj + rho * max(0.0, target - ch) ** 2

            f_start = penalized(theta)
            nfev = 0
            # restarted direct search: a fresh simplex around the incumbent until it stalls
            for _ in range(config.nm_restarts):
                simplex = np.vstack([theta, theta + config.simplex_step * np.eye(theta.size)])
                res = minimize(
                    penalized,
                    theta,
                    method="Nelder-Mead",
                    options={
                        "maxfev": config.max_iterations,
                        "initial_simplex": simplex,
                        "xatol": 1e-7,
                        "fatol": 1e-10,
                        "adaptive": theta.size > 6,
                    },
                )
                nfev += int(res.nfev)
                f_prev = penalized(theta)
                if res.fun < f_prev:
                    theta = res.x
                if f_prev - res.fun <= 1e-9 * (1.0 + abs(f_prev)):
                    break
            obj, ch, _ = evaluate(theta)
            history.append({"restart": r, "rho": rho, "f_start": f_start, "f_end": penalized(theta), "objective": obj, "chance": ch, "nfev": nfev})
            log.debug("restart %d rho=%g obj=%.6f chance=%.6f", r, rho, obj, ch)
            if target - ch <= config.tolerance:
                break
            rho *= config.penalty_growth
        params = decode(theta, Lr, n, box, config.diagonal)
        obj, ch, rate = estimate_both(params, problem, scenarios, M, stream)
        results.append(GmmResult(params, obj, ch, rate, r, rho, history))

    feasible = [g for g in results if g.chance >= target - FEAS_SLACK]
    if not feasible:
        best = max(results, key=lambda g: (g.chance, -g.objective))
        raise GmmSolveError(f"no restart reached chance >= {target - FEAS_SLACK:.4f} (best {best.chance:.4f})", best)
    best = min(feasible, key=lambda g: (g.objective, g.restart))
    best.history = [h for g in results for h in g.history]
    return best
