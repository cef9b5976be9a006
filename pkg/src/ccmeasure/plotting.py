"""Deterministic SVG figures.

Matplotlib is pinned to the SVG backend with a fixed hash salt and no date
metadata, so the same data always produces the same bytes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("svg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Circle, Polygon  # noqa: E402

from .problem import DiscretePolicy, GmmPolicy, PointPolicy, Problem  # noqa: E402

_RC = {"svg.hashsalt": "ccmeasure", "svg.fonttype": "path", "path.simplify": False}


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_measure_1d(problem: Problem, policy, path, title: str = "") -> None:
    """Cost and satisfaction curves over the box with the policy overlaid."""
    lo, hi = float(problem.box.lower[0]), float(problem.box.upper[0])
    xs = np.linspace(lo, hi, 401)
    with matplotlib.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
        ax1.plot(xs, problem.costs(xs[:, None]), color="k", lw=1, label="J(x)")
        if problem.exact_prob_fn is not None:
            ax1b = ax1.twinx()
            ax1b.plot(xs, problem.exact_prob_fn(xs[:, None]), color="tab:green", lw=1, ls="--")
            ax1b.axhline(1 - problem.alpha, color="tab:green", lw=0.6, ls=":")
            ax1b.set_ylabel("P(h <= 0)")
        ax1.set_ylabel("cost")
        ax1.legend(loc="lower left")
        if isinstance(policy, DiscretePolicy):
            ax2.stem(policy.points[:, 0], policy.weights, basefmt=" ")
            ax2.set_ylabel("weight")
        elif isinstance(policy, GmmPolicy):
            from .gmm import gmm_pdf

            dens = gmm_pdf(policy.params, xs[:, None])
            mass = np.trapezoid(dens, xs)
            ax2.plot(xs, dens / mass if mass > 0 else dens, color="tab:blue")
            ax2.set_ylabel("density on box")
        elif isinstance(policy, PointPolicy):
            ax2.axvline(policy.x[0], color="tab:red")
            ax2.set_ylabel("point decision")
        ax2.set_xlabel("x")
        if title:
            fig.suptitle(title)
        fig.tight_layout()
    _save(fig, path)


def plot_trajectories(spec, states, feasible, path, title: str = "") -> None:
    """Sampled position paths, blue when the joint event holds and red otherwise.

    Each path is its own SVG element with id ``rollout-<i>``.
    """
    states = np.asarray(states, dtype=float)
    feasible = np.asarray(feasible, dtype=bool)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 6))
        for obs in spec.obstacles:
            ax.add_patch(Polygon(obs.vertices(), closed=True, color="0.6", zorder=1))
        ax.add_patch(Circle(spec.goal_center, spec.goal_radius, fill=False, ec="tab:green", lw=1.5, zorder=1))
        for i, (tr, ok) in enumerate(zip(states, feasible)):
            (line,) = ax.plot(tr[:, 0], tr[:, 2], color="tab:blue" if ok else "tab:red", lw=0.6, alpha=0.6, zorder=2)
            line.set_gid(f"rollout-{i}")
        ax.set_aspect("equal")
        ax.set_xlabel("p_x")
        ax.set_ylabel("p_y")
        rate = 1.0 - feasible.mean() if feasible.size else 0.0
        ax.set_title(title or f"{feasible.size} rollouts, violation {rate:.3f}")
        fig.tight_layout()
    _save(fig, path)


def plot_sweep(rows, path) -> None:
    """Mean objective against S, one line per N, with standard-error bars."""
    rows = list(rows)
    with matplotlib.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(6, 4))
        for N in sorted({r["N"] for r in rows}):
            Ss = sorted({r["S"] for r in rows if r["N"] == N})
            mean, err = [], []
            for S in Ss:
                v = np.array([r["objective"] for r in rows if r["N"] == N and r["S"] == S], dtype=float)
                v = v[np.isfinite(v)]
                mean.append(v.mean() if v.size else np.nan)
                err.append(v.std(ddof=1) / np.sqrt(v.size) if v.size > 1 else 0.0)
            ax.errorbar(Ss, mean, yerr=err, marker="o", capsize=3, label=f"N={N}")
        ax.set_xscale("log")
        ax.set_xlabel("S")
        ax.set_ylabel("mean objective")
        ax.legend()
        fig.tight_layout()
    _save(fig, path)
