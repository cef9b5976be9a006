"""Out-of-sample Monte Carlo validation of policies and cross-method comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from .errors import DomainError
from .problem import DiscretePolicy, GmmPolicy, PointPolicy, Problem
from .sampling import RngStream, sample_scenarios

Z95 = float(norm.ppf(0.975))


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise DomainError("trials must be positive")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    # clamp so that the point estimate always lies inside, even after rounding
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


@dataclass
class ValidationReport:
    policy_kind: str
    problem_id: str
    M_val: int
    violations: int
    violation_rate: float
    ci_low: float
    ci_high: float
    expected_cost: float
    cost_stderr: float
    seed: int
    stream_id: int
    method: str = ""
    exact_cost: Optional[float] = None

    @property
    def objective(self) -> float:
        """Exact weighted cost where available, the MC mean otherwise."""
        return self.exact_cost if self.exact_cost is not None else self.expected_cost

    @property
    def objective_stderr(self) -> float:
        return 0.0 if self.exact_cost is not None else self.cost_stderr

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ValidationReport":
        known = set(cls.__dataclass_fields__)
        missing = {"policy_kind", "problem_id", "M_val", "violation_rate", "expected_cost"} - set(d)
        if missing:
            raise DomainError(f"validation record lacks {sorted(missing)}")
        return cls(**{k: v for k, v in d.items() if k in known})


def draw_decisions(policy, problem: Problem, M: int, stream: RngStream) -> np.ndarray:
    if isinstance(policy, PointPolicy):
        return np.repeat(policy.x[None, :], M, axis=0)
    if isinstance(policy, DiscretePolicy):
        rng = stream.generator()
        k = rng.choice(len(policy.weights), size=M, p=policy.weights)
        return policy.points[k]
    if isinstance(policy, GmmPolicy):
        from .gmm import sample_gmm

        X, _ = sample_gmm(policy.params, M, stream, problem.box)
        return X
    raise DomainError(f"unsupported policy type {type(policy).__name__}")


def validate_policy(policy, problem: Problem, M_val: int, stream: RngStream, method: str = "", block: int = 4096) -> ValidationReport:
    """Fresh-scenario Monte Carlo estimate of violation rate and expected cost.

    Trial ``k`` pairs decision draw ``x_k`` with its own scenario ``delta_k``.
    Decisions come from ``stream`` and scenarios from ``stream.substream(1)``.
    """
    if M_val < 1:
        raise DomainError("M_val must be at least 1")
    X = draw_decisions(policy, problem, M_val, stream)
    D = sample_scenarios(problem.scenario_model, M_val, stream.substream(1)).scenarios
    ok = 0
    cost_blocks = []
    # fixed block order keeps the floating-point cost sum reproducible
    for k in range(0, M_val, block):
        ok += int(problem.satisfied_pairs(X[k : k + block], D[k : k + block]).sum())
        cost_blocks.append(problem.realized_costs(X[k : k + block], D[k : k + block]))
    costs = np.concatenate(cost_blocks)
    violations = M_val - ok
    lo, hi = wilson_interval(violations, M_val)
    stderr = float(np.std(costs, ddof=1) / math.sqrt(M_val)) if M_val > 1 else 0.0

    exact = None
    if isinstance(policy, DiscretePolicy):
        exact = float(math.fsum(policy.weights * problem.costs(policy.points)))
    elif isinstance(policy, PointPolicy):
        exact = problem.eval_cost(policy.x)
    return ValidationReport(
        policy_kind=policy.kind,
        problem_id=problem.id,
        M_val=M_val,
        violations=violations,
        violation_rate=violations / M_val,
        ci_low=lo,
        ci_high=hi,
        expected_cost=float(math.fsum(costs) / M_val),
        cost_stderr=stderr,
        seed=stream.seed,
        stream_id=stream.stream_id,
        method=method or policy.kind,
        exact_cost=exact,
    )


COMPARISON_COLUMNS = [
    "method",
    "policy_kind",
    "problem",
    "M_val",
    "objective",
    "objective_stderr",
    "delta_objective",
    "violation_rate",
    "delta_violation",
    "ci_low",
    "ci_high",
    "expected_cost_mc",
    "cost_stderr",
]


@dataclass
class ComparisonTable:
    rows: list
    ordering_pass: Optional[bool]
    reference: str
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        from .serialize import fmt_float

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARISON_COLUMNS)
        for r in self.rows:
            w.writerow([fmt_float(r[c]) if isinstance(r[c], float) else r[c] for c in COMPARISON_COLUMNS])
        return buf.getvalue()

    def to_text(self) -> str:
        head = f"{'method':<14}{'kind':<10}{'objective':>14}{'violation':>11}{'95% CI':>20}{'d_obj':>12}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            ci = f"[{r['ci_low']:.4f}, {r['ci_high']:.4f}]"
            lines.append(
                f"{r['method']:<14}{r['policy_kind']:<10}{r['objective']:>14.6f}{r['violation_rate']:>11.4f}{ci:>20}{r['delta_objective']:>12.6f}"
            )
        flag = {True: "pass", False: "FAIL", None: "n/a"}[self.ordering_pass]
        lines.append("")
        lines.append(f"measure objective <= point objective: {flag}")
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"


def compare_policies(reports: Sequence[ValidationReport]) -> ComparisonTable:
    """Tabulate reports against the first one and check the measure-vs-point ordering.

    The ordering flag passes when every measure policy (discrete or GMM) has
    objective no larger than every point policy, allowing three combined
    standard errors where an objective is a Monte Carlo estimate.
    """
    if not reports:
        raise DomainError("no reports to compare")
    pid = {r.problem_id for r in reports}
    if len(pid) > 1:
        raise DomainError(f"reports cover different problems: {sorted(pid)}")
    if len({r.M_val for r in reports}) > 1:
        raise DomainError("reports use different validation sample sizes")
    ref = reports[0]
    rows = []
    for r in reports:
        rows.append(
            {
                "method": r.method or r.policy_kind,
                "policy_kind": r.policy_kind,
                "problem": r.problem_id,
                "M_val": r.M_val,
                "objective": float(r.objective),
                "objective_stderr": float(r.objective_stderr),
                "delta_objective": float(r.objective - ref.objective),
                "violation_rate": float(r.violation_rate),
                "delta_violation": float(r.violation_rate - ref.violation_rate),
                "ci_low": float(r.ci_low),
                "ci_high": float(r.ci_high),
                "expected_cost_mc": float(r.expected_cost),
                "cost_stderr": float(r.cost_stderr),
            }
        )
    points = [r for r in reports if r.policy_kind == "point"]
    measures = [r for r in reports if r.policy_kind in ("discrete", "gmm")]
    ordering = None
    notes = []
    if points and measures:
        ordering = True
        for m in measures:
            for p in points:
                slack = 3.0 * math.hypot(m.objective_stderr, p.objective_stderr)
                if m.objective > p.objective + slack:
                    ordering = False
                    notes.append(f"{m.method}: objective {m.objective:.6g} exceeds {p.method}: {p.objective:.6g}")
                else:
                    red = 100.0 * (p.objective - m.objective) / abs(p.objective) if p.objective else float("nan")
                    notes.append(f"{m.method} vs {p.method}: cost reduced by {red:.1f}%")
    return ComparisonTable(rows, ordering, ref.method or ref.policy_kind, notes)
