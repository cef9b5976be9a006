"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible,
4 numeric failure.  Output goes to ``--out``, defaulting to
``$CCMEASURE_OUT`` and then ``./ccmeasure-out``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .errors import DegenerateSupportError, DomainError, NumericError
from .pipeline import METHODS, PROBLEM_DEFAULTS, SAMPLING_MODES, RunConfig, build_problem, solve, sweep, sweep_trend
from .problem import list_problems
from .sampling import VALIDATION_STREAM, RngStream
from .serialize import fmt_float, policy_from_dict, read_json, write_json

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4
OUT_ENV = "CCMEASURE_OUT"

log = logging.getLogger("ccmeasure")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


# -- config files --------------------------------------------------------------

_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_EXTRA_TYPES = {"epsilon": 0.0, "scenario_file": ""}


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  Keys may use dashes."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{origin}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise UsageError(f"{origin}:{lineno}: unknown key {key!r}")
        out[key] = _coerce(key, val, f"{origin}:{lineno}")
    return out


def _coerce(key, val, where):
    default = getattr(RunConfig(), key)
    if default is None:
        default = PROBLEM_DEFAULTS["toy1d"].get(key, _EXTRA_TYPES.get(key, ""))
    typ = type(default)
    try:
        if typ is bool:
            low = val.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return low in ("true", "1", "yes")
        if typ is int:
            return int(val)
        if typ is float:
            return float(val)
        return val
    except ValueError:
        raise UsageError(f"{where}: bad value {val!r} for {key}") from None


# -- argument parsing ----------------------------------------------------------


def _solver_args(p, with_method=True):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--problem", choices=list_problems())
    if with_method:
        p.add_argument("--method", choices=METHODS)
    p.add_argument("--seed", type=int)
    p.add_argument("--N", type=int, help="scenario samples")
    p.add_argument("--L", type=int, help="mixture components")
    p.add_argument("--alpha", type=float)
    p.add_argument("--epsilon", type=float, help="baseline tolerance (default: alpha)")
    p.add_argument("--gamma", type=float, help="baseline satisfaction margin")
    p.add_argument("--decision-sampling", choices=SAMPLING_MODES)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--exact-q", action="store_true", default=None, help="toy1d: use exact satisfaction probabilities")
    p.add_argument("--M-val", type=int, dest="M_val", help="validation trials")
    p.add_argument("--restarts", type=int)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--penalty-initial", type=float)
    p.add_argument("--penalty-growth", type=float)
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--gmm-init", choices=("uniform", "lp"))
    p.add_argument("--gmm-scenarios", type=int)
    p.add_argument("--scenario-file", help="quadrotor scenario JSON")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./ccmeasure-out)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ccmeasure", description="Chance-constrained optimization over probability measures.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one configuration and validate the result")
    _solver_args(p)
    p.add_argument("--S", type=int, help="decision samples")
    p.add_argument("--no-validate", action="store_true")

    p = sub.add_parser("validate", help="Monte Carlo validation of a saved policy")
    p.add_argument("--policy", required=True)
    p.add_argument("--problem", required=True, choices=list_problems())
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float)
    p.add_argument("--scenario-file")
    p.add_argument("--out")

    p = sub.add_parser("sweep", help="sample-LP convergence sweep over S and N")
    _solver_args(p, with_method=False)
    p.add_argument("--S", dest="S_list", required=True, help="comma-separated list")
    p.set_defaults(N=None)
    p.add_argument("--N-list", dest="N_list", help="comma-separated list (overrides --N)")
    p.add_argument("--seeds", type=int, default=20, help="number of seeds, starting at --seed")

    p = sub.add_parser("report", help="comparison table from solve reports")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--rollouts", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")

    sub.add_parser("problems", help="list registered problems")
    return ap


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUT_ENV) or "ccmeasure-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _run_config(args) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        values.update(parse_config_text(text, args.config))
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    return RunConfig(**values)


def _int_list(text, what):
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of integers") from None
    if not vals or min(vals) < 1:
        raise UsageError(f"{what} needs positive integers")
    return vals


# -- subcommands ---------------------------------------------------------------


def cmd_solve(args) -> int:
    cfg = _run_config(args)
    out = _out_dir(args)
    res = solve(cfg, validate=not args.no_validate)
    write_json(res.report(), out / "report.json")
    if res.policy is None:
        print(f"{res.config.problem} {res.config.method}: infeasible")
        return EXIT_INFEASIBLE
    from .serialize import policy_to_dict

    write_json(policy_to_dict(res.policy), out / "policy.json")
    if res.problem.n == 1:
        from .plotting import plot_measure_1d

        plot_measure_1d(res.problem, res.policy, out / "measure.svg", title=f"{res.config.method}: objective {res.objective:.4f}")
    line = f"{res.config.problem} {res.config.method}: objective {res.objective:.6f}"
    if res.validation is not None:
        v = res.validation
        line += f", violation {v.violation_rate:.4f} [{v.ci_low:.4f}, {v.ci_high:.4f}] at M={v.M_val}"
    print(line)
    return EXIT_OK


def _problem_for(problem_id, alpha=None, scenario_file=None):
    cfg = RunConfig(problem=problem_id, alpha=alpha, scenario_file=scenario_file).resolved()
    return build_problem(cfg)


def cmd_validate(args) -> int:
    try:
        d = read_json(args.policy)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read policy: {exc}") from None
    if isinstance(d, dict) and "policy" in d and "kind" not in d:
        d = d["policy"]  # accept a solve report as well
    policy = policy_from_dict(d)
    problem = _problem_for(args.problem, args.alpha, args.scenario_file)
    from .validation import validate_policy

    rep = validate_policy(policy, problem, args.M, RngStream(args.seed, VALIDATION_STREAM))
    out = _out_dir(args)
    write_json(rep.to_dict(), out / "validation.json")
    with open(out / "validation.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        row = rep.to_dict()
        w.writerow(list(row))
        w.writerow(["" if v is None else fmt_float(v) if isinstance(v, float) else v for v in row.values()])
    print(f"violation {rep.violation_rate:.4f} [{rep.ci_low:.4f}, {rep.ci_high:.4f}], expected cost {rep.expected_cost:.6f} +- {rep.cost_stderr:.2g}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    S_values = _int_list(args.S_list, "--S")
    N_values = _int_list(args.N_list, "--N-list") if args.N_list else [args.N or 2000]
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    base = _run_config(args)
    if base.decision_sampling is None:
        base = dataclasses.replace(base, decision_sampling="uniform")
    first = base.seed
    rows = sweep(base, S_values, N_values, range(first, first + args.seeds))
    out = _out_dir(args)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["S", "N", "seed", "objective", "violation"])
        for r in rows:
            w.writerow([r["S"], r["N"], r["seed"], fmt_float(r["objective"]), fmt_float(r["violation"])])
    from .plotting import plot_sweep

    plot_sweep(rows, out / "sweep.svg")
    for N, t in sweep_trend(rows).items():
        means = ", ".join(f"S={S}: {m:.4f}" for S, m in t["means"].items())
        print(f"N={N}: {means}; nonincreasing within one pooled stderr: {'yes' if t['nonincreasing'] else 'no'}")
    return EXIT_OK


def cmd_report(args) -> int:
    if not args.inputs:
        raise UsageError("report needs at least one solve report")
    from .validation import ValidationReport, compare_policies

    reports, docs = [], []
    for path in args.inputs:
        try:
            d = read_json(path)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read {path}: {exc}") from None
        if not isinstance(d, dict) or not isinstance(d.get("validation"), dict):
            raise UsageError(f"{path}: not a validated solve report")
        try:
            reports.append(ValidationReport.from_dict(d["validation"]))
        except (DomainError, TypeError) as exc:
            raise UsageError(f"{path}: {exc}") from None
        docs.append(d)
    table = compare_policies(reports)
    out = _out_dir(args)
    (out / "comparison.csv").write_text(table.to_csv())
    (out / "comparison.txt").write_text(table.to_text())
    sys.stdout.write(table.to_text())
    if reports[0].problem_id == "quadrotor":
        for k, d in enumerate(docs):
            _trajectory_figure(d, args.rollouts, args.seed, out / f"trajectories-{k}-{d.get('method', 'policy')}.svg")
    return EXIT_OK


def _trajectory_figure(doc, rollouts, seed, path):
    from .plotting import plot_trajectories
    from .quadrotor import QuadrotorSpec, joint_success, rollout
    from .sampling import sample_scenarios
    from .validation import draw_decisions

    spec = QuadrotorSpec.from_dict(doc["scenario"]) if doc.get("scenario") else QuadrotorSpec()
    from .quadrotor import as_problem

    problem = as_problem(spec, alpha=doc["config"]["alpha"])
    policy = policy_from_dict(doc["policy"])
    stream = RngStream(seed, VALIDATION_STREAM).substream(7)
    U = draw_decisions(policy, problem, rollouts, stream)
    D = sample_scenarios(problem.scenario_model, rollouts, stream.substream(1)).scenarios
    states = rollout(spec, U, D)
    plot_trajectories(spec, states, joint_success(states, spec), path, title=f"{doc.get('method', '')}: {rollouts} rollouts")


def cmd_problems(args) -> int:
    for pid in list_problems():
        p = _problem_for(pid)
        print(f"{pid}\tn={p.n}\ts={p.s}\talpha={p.alpha}")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "validate": cmd_validate, "sweep": cmd_sweep, "report": cmd_report, "problems": cmd_problems}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, DomainError) as exc:
        print(f"ccmeasure: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, DegenerateSupportError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"ccmeasure: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
