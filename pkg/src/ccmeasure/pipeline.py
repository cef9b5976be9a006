"""End-to-end solve runs; the CLI is a thin wrapper over this module."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, GmmSolveError
from .gmm import GmmParams, GmmSolveConfig, solve_gmm
from .measure_lp import solve_ccp_baseline, solve_sample_lp
from .problem import DiscretePolicy, GmmPolicy, PointPolicy, Problem, get_problem
from .sampling import (
    DECISION_STREAM,
    GMM_STREAM,
    SCENARIO_STREAM,
    VALIDATION_STREAM,
    DecisionSampleSet,
    Origin,
    RngStream,
    ScenarioSampleSet,
    grid_decisions,
    sample_decisions_uniform,
    sample_scenarios,
)
from .satisfaction import build_matrix
from .serialize import lp_solution_to_dict, policy_to_dict
from .validation import validate_policy

log = logging.getLogger(__name__)

METHODS = ("baseline", "sample_lp", "gmm")
SAMPLING_MODES = tuple(o.value for o in Origin)

# Per-problem defaults; any field left as None in RunConfig falls back here.
PROBLEM_DEFAULTS = {
    "toy1d": dict(
        S=100,
        N=2000,
        L=6,
        alpha=0.05,
        gamma=0.0,
        decision_sampling="grid",
        grid_step=0.02,
        M_val=10_000,
        restarts=4,
        mc_samples=2000,
        max_iterations=3000,
        max_penalty_rounds=6,
        nm_restarts=3,
        gmm_init="uniform",
        gmm_scenarios=0,
        diagonal=False,
        init_sd=0.0,
    ),
    "quadrotor": dict(
        S=1000,
        N=2000,
        L=2,
        alpha=0.15,
        gamma=0.01,
        decision_sampling="trajectory",
        grid_step=1.0,
        M_val=5000,
        restarts=1,
        mc_samples=200,
        max_iterations=200,
        max_penalty_rounds=2,
        nm_restarts=1,
        gmm_init="lp",
        gmm_scenarios=500,
        diagonal=True,
        init_sd=0.5,
    ),
}


@dataclass
class RunConfig:
    """Everything a solve depends on.  ``None`` means "use the problem default"."""

    problem: str = "toy1d"
    method: str = "sample_lp"
    seed: int = 0
    S: Optional[int] = None
    N: Optional[int] = None
    L: Optional[int] = None
    alpha: Optional[float] = None
    epsilon: Optional[float] = None  # baseline tolerance; defaults to alpha
    gamma: Optional[float] = None
    decision_sampling: Optional[str] = None
    grid_step: Optional[float] = None
    exact_q: bool = False
    M_val: Optional[int] = None
    restarts: Optional[int] = None
    mc_samples: Optional[int] = None
    penalty_initial: float = 1e4
    penalty_growth: float = 10.0
    max_iterations: Optional[int] = None
    max_penalty_rounds: Optional[int] = None
    nm_restarts: Optional[int] = None
    gmm_init: Optional[str] = None
    gmm_scenarios: Optional[int] = None
    diagonal: Optional[bool] = None
    init_sd: Optional[float] = None
    scenario_file: Optional[str] = None

    def resolved(self) -> "RunConfig":
        if self.problem not in PROBLEM_DEFAULTS:
            raise DomainError(f"unknown problem {self.problem!r}; known: {', '.join(sorted(PROBLEM_DEFAULTS))}")
        d = dataclasses.asdict(self)
        for k, v in PROBLEM_DEFAULTS[self.problem].items():
            if d[k] is None:
                d[k] = v
        if d["epsilon"] is None:
            d["epsilon"] = d["alpha"]
        cfg = RunConfig(**d)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}")
        if self.decision_sampling not in SAMPLING_MODES:
            raise DomainError(f"decision sampling must be one of {SAMPLING_MODES}")
        if self.decision_sampling == "trajectory" and self.problem != "quadrotor":
            raise DomainError("trajectory sampling is only defined for the quadrotor")
        if self.exact_q and self.problem != "toy1d":
            raise DomainError("exact satisfaction probabilities are only available for toy1d")
        if self.scenario_file and self.problem != "quadrotor":
            raise DomainError("a scenario file only applies to the quadrotor")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")
        for k in ("S", "N", "L", "M_val", "restarts", "mc_samples", "max_iterations", "max_penalty_rounds", "nm_restarts"):
            if getattr(self, k) < 1:
                raise DomainError(f"{k} must be at least 1")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("alpha must lie in (0, 1)")
        if not 0.0 <= self.epsilon < 1.0:
            raise DomainError("epsilon must lie in [0, 1)")
        if self.gamma < 0 or not self.grid_step > 0:
            raise DomainError("gamma must be nonnegative and grid_step positive")
        if self.gmm_init not in ("uniform", "lp"):
            raise DomainError("gmm_init must be 'uniform' or 'lp'")
        if self.gmm_scenarios < 0:
            raise DomainError("gmm_scenarios must be nonnegative (0 uses all)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def build_problem(cfg: RunConfig) -> Problem:
    if cfg.problem == "quadrotor":
        from .quadrotor import QuadrotorSpec, as_problem

        spec = QuadrotorSpec.load(cfg.scenario_file) if cfg.scenario_file else QuadrotorSpec()
        return as_problem(spec, alpha=cfg.alpha)
    return get_problem(cfg.problem, alpha=cfg.alpha)


def draw_decisions(problem: Problem, cfg: RunConfig, S: Optional[int] = None) -> DecisionSampleSet:
    S = cfg.S if S is None else S
    stream = RngStream(cfg.seed, DECISION_STREAM)
    if cfg.decision_sampling == "grid":
        return grid_decisions(problem.box, cfg.grid_step)
    if cfg.decision_sampling == "trajectory":
        from .quadrotor import sample_trajectory_controls

        return sample_trajectory_controls(problem.meta["spec"], S, stream)
    return sample_decisions_uniform(problem.box, S, stream)


def draw_scenarios(problem: Problem, cfg: RunConfig, N: Optional[int] = None) -> ScenarioSampleSet:
    return sample_scenarios(problem.scenario_model, cfg.N if N is None else N, RngStream(cfg.seed, SCENARIO_STREAM))


def satisfaction_q(problem: Problem, cfg: RunConfig, xs: DecisionSampleSet, ds: Optional[ScenarioSampleSet], gamma: float) -> np.ndarray:
    if cfg.exact_q:
        if gamma:
            raise DomainError("exact satisfaction probabilities do not support a margin")
        return np.asarray(problem.exact_prob_fn(xs.points), dtype=float)
    return build_matrix(problem, xs, ds, gamma).q


@dataclass
class SolveOutcome:
    status: str  # optimal | infeasible
    config: RunConfig
    problem: Problem
    policy: object = None
    objective: float = math.nan
    validation: object = None
    details: dict = field(default_factory=dict)

    def report(self) -> dict:
        out = {
            "problem": self.config.problem,
            "method": self.config.method,
            "status": self.status,
            "objective": self.objective,
            "config": self.config.to_dict(),
            "policy": policy_to_dict(self.policy) if self.policy is not None else None,
            "validation": self.validation.to_dict() if self.validation is not None else None,
            "details": self.details,
        }
        spec = self.problem.meta.get("spec")
        if spec is not None:
            out["scenario"] = spec.to_dict()
        return out


def _lp_stage(problem, cfg, xs, ds):
    q = satisfaction_q(problem, cfg, xs, ds, 0.0)
    costs = problem.costs(xs.points)
    sol = solve_sample_lp(costs, q, problem.alpha)
    return sol, q, costs


def solve(cfg: RunConfig, validate: bool = True) -> SolveOutcome:
    """Run one configured solve.  Infeasibility is a status, not an exception."""
    cfg = cfg.resolved()
    problem = build_problem(cfg)
    ds = None if cfg.exact_q else draw_scenarios(problem, cfg)
    out = SolveOutcome("infeasible", cfg, problem)

    if cfg.method == "baseline":
        xs = draw_decisions(problem, cfg)
        q = satisfaction_q(problem, cfg, xs, ds, cfg.gamma)
        costs = problem.costs(xs.points)
        sol = solve_ccp_baseline(costs, q, cfg.epsilon)
        out.details = {"S": len(xs), "q": sol.q, "index": sol.index}
        if sol.optimal:
            out.status, out.objective = "optimal", sol.objective
            out.policy = PointPolicy(xs.points[sol.index])
    elif cfg.method == "sample_lp":
        xs = draw_decisions(problem, cfg)
        sol, q, _ = _lp_stage(problem, cfg, xs, ds)
        out.details = {"S": len(xs), "lp": lp_solution_to_dict(sol, xs.points)}
        if sol.optimal:
            idx = list(sol.measure.indices)
            out.status, out.objective = "optimal", sol.objective
            out.policy = DiscretePolicy(tuple(idx), np.array(sol.measure.weights), xs.points[idx])
            out.details["q_support"] = [float(q[i]) for i in idx]
    else:
        out = _solve_gmm(problem, cfg, ds, out)

    if validate and out.policy is not None:
        out.validation = validate_policy(out.policy, problem, cfg.M_val, RngStream(cfg.seed, VALIDATION_STREAM), method=cfg.method)
    return out


def _solve_gmm(problem, cfg, ds, out):
    if cfg.exact_q:
        raise DomainError("the mixture solver needs sampled scenarios")
    gcfg = GmmSolveConfig(
        mc_samples=cfg.mc_samples,
        penalty_initial=cfg.penalty_initial,
        penalty_growth=cfg.penalty_growth,
        restarts=cfg.restarts,
        max_iterations=cfg.max_iterations,
        max_penalty_rounds=cfg.max_penalty_rounds,
        nm_restarts=cfg.nm_restarts,
        diagonal=cfg.diagonal,
        stream=RngStream(cfg.seed, GMM_STREAM),
    )
    init = None
    L = cfg.L
    if cfg.gmm_init == "lp":
        # warm start: one narrow component on each support point of the sample LP
        xs = draw_decisions(problem, cfg)
        sol, _, _ = _lp_stage(problem, cfg, xs, ds)
        if not sol.optimal:
            out.details = {"warm_start": "sample LP infeasible"}
            return out
        pts = xs.points[list(sol.measure.indices)]
        F = np.repeat(np.diag(np.full(problem.n, cfg.init_sd))[None], len(pts), axis=0)
        init = [GmmParams(np.array(sol.measure.weights), pts, F)]
        L = len(pts)
    sub = ds if cfg.gmm_scenarios == 0 else ScenarioSampleSet(ds.scenarios[: cfg.gmm_scenarios])
    try:
        res = solve_gmm(problem, sub, L, gcfg, init=init)
    except GmmSolveError as exc:
        b = exc.best
        out.details = {"error": str(exc), "best_policy": policy_to_dict(GmmPolicy(b.params)), "best_chance": b.chance, "best_objective": b.objective}
        return out
    out.status, out.objective = "optimal", res.objective
    out.policy = GmmPolicy(res.params)
    out.details = {
        "L": res.params.L,
        "chance": res.chance,
        "acceptance_rate": res.acceptance_rate,
        "restart": res.restart,
        "penalty": res.penalty,
        "history": res.history,
        "scenarios_used": len(sub),
    }
    return out


# -- sweep -------------------------------------------------------------------


def sweep(base: RunConfig, S_values, N_values, seeds) -> list:
    """Sample-LP objective and validated violation over an (S, N, seed) grid.

    Decision and scenario sets are nested: for each seed the largest sets are
    drawn once and smaller runs use their prefixes.
    """
    S_values, N_values, seeds = sorted(set(S_values)), sorted(set(N_values)), list(seeds)
    if not S_values or not N_values or not seeds:
        raise DomainError("sweep needs at least one S, one N and one seed")
    rows = []
    for seed in seeds:
        cfg = dataclasses.replace(base, seed=seed, method="sample_lp", S=max(S_values), N=max(N_values)).resolved()
        if cfg.decision_sampling == "grid":
            raise DomainError("a sweep over S needs random decision sampling")
        problem = build_problem(cfg)
        xs_all = draw_decisions(problem, cfg)
        ds_all = draw_scenarios(problem, cfg)
        costs_all = problem.costs(xs_all.points)
        val_stream = RngStream(seed, VALIDATION_STREAM)
        for N in N_values:
            q_all = build_matrix(problem, xs_all, ScenarioSampleSet(ds_all.scenarios[:N])).q
            for S in S_values:
                sol = solve_sample_lp(costs_all[:S], q_all[:S], problem.alpha)
                viol = math.nan
                if sol.optimal:
                    idx = list(sol.measure.indices)
                    pol = DiscretePolicy(tuple(idx), np.array(sol.measure.weights), xs_all.points[idx])
                    viol = validate_policy(pol, problem, cfg.M_val, val_stream).violation_rate
                rows.append({"S": S, "N": N, "seed": seed, "objective": sol.objective, "violation": viol})
    rows.sort(key=lambda r: (r["S"], r["N"], r["seed"]))
    return rows


def sweep_trend(rows) -> dict:
    """Per-N check that mean objective does not increase with S beyond one pooled standard error."""
    out = {}
    for N in sorted({r["N"] for r in rows}):
        Ss = sorted({r["S"] for r in rows if r["N"] == N})
        stats = []
        for S in Ss:
            v = np.array([r["objective"] for r in rows if r["N"] == N and r["S"] == S], dtype=float)
            v = v[np.isfinite(v)]
            stats.append((S, v.mean(), v.var(ddof=1) / v.size if v.size > 1 else 0.0))
        ok = all(b[1] <= a[1] + math.sqrt(a[2] + b[2]) for a, b in zip(stats, stats[1:]))
        out[N] = {"means": {s: m for s, m, _ in stats}, "nonincreasing": ok}
    return out
