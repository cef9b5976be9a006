"""Planar quadrotor in turbulence with open-loop control trajectories.

State ``[p_x, v_x, p_y, v_y]``; per step

    x_{t+1} = A x_t + B(m) u_t + d(x_t, phi) + w_t

with a double integrator ``A``, mass-scaled input matrix ``B(m)`` and
quadratic drag ``d = -phi [dt^2 |v_x| v_x / 2, dt |v_x| v_x, ...]``.  A
scenario is the flat vector ``(m, phi, w_0, ..., w_{T-1})``.  The decision is
the flat control vector ``(u_{x,0}, u_{y,0}, u_{x,1}, ...)``.

All functions broadcast over leading axes, so a ``(S, 1, 2T)`` control batch
against an ``(1, N, 2+4T)`` scenario batch rolls out the full S x N grid.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericError
from .problem import Box, Problem
from .sampling import (
    QUAD_COST_STREAM,
    DecisionSampleSet,
    MultivariateNormal,
    Origin,
    Product,
    RngStream,
    ScaledBeta,
    sample_scenarios,
)


@dataclass(frozen=True, eq=False)
class Polytope:
    """``{p : normals @ p <= offsets}`` in the plane."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.normals, dtype=float))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=float))
        if A.shape[1] != 2 or A.shape[0] != b.size:
            raise DomainError("polytope needs K x 2 normals and K offsets")
        if A.shape[0] > 8:
            raise DomainError("polytopes are limited to 8 faces")
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)
        verts = self.vertices()
        if len(verts) < 3 or _polygon_area(verts) <= 1e-12 or not _bounded(A):
            raise DomainError("polytope must be bounded with nonempty interior")

    @classmethod
    def rectangle(cls, xmin, xmax, ymin, ymax) -> "Polytope":
        return cls([[1, 0], [-1, 0], [0, 1], [0, -1]], [xmax, -xmin, ymax, -ymin])

    def vertices(self) -> np.ndarray:
        """Vertices by pairwise face intersection, counter-clockwise."""
        A, b = self.normals, self.offsets
        pts = []
        for i in range(len(b)):
            for j in range(i + 1, len(b)):
                M = A[[i, j]]
                if abs(np.linalg.det(M)) < 1e-12:
                    continue
                p = np.linalg.solve(M, b[[i, j]])
                if np.all(A @ p <= b + 1e-9):
                    pts.append(p)
        if not pts:
            return np.zeros((0, 2))
        pts = np.unique(np.round(np.array(pts), 12), axis=0)
        c = pts.mean(axis=0)
        order = np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))
        return pts[order]

    def contains(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.all(p @ self.normals.T <= self.offsets, axis=-1)

    def depth(self, p) -> np.ndarray:
        """``min_k (offsets_k - normals_k . p)``; positive strictly inside."""
        p = np.asarray(p, dtype=float)
        return np.min(self.offsets - p @ self.normals.T, axis=-1)


def _polygon_area(v):
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _bounded(A):
    ang = np.sort(np.arctan2(A[:, 1], A[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    return gaps.max() < np.pi - 1e-12


@dataclass(frozen=True, eq=False)
class QuadrotorSpec:
    T: int = 10
    dt: float = 0.25
    x0: tuple = (-0.5, 0.0, -0.5, 0.0)
    mass_beta: tuple = (2.0, 2.0, 0.75, 0.5)  # (a, b, loc, scale)
    drag_beta: tuple = (2.0, 5.0, 0.4, 0.2)
    noise_var: tuple = (0.01, 0.75, 0.01, 0.75)
    goal_center: tuple = (10.0, 10.0)
    goal_radius: float = 2.0
    obstacles: tuple = field(
        default_factory=lambda: (Polytope.rectangle(3.5, 5.5, -2, 3.5), Polytope.rectangle(3.5, 5.5, 6.5, 12))
    )
    control_bound: float = 30.0
    cost_weights: tuple = (1.0, 0.1)
    cost_scenarios: int = 64
    cost_seed: int = 20240101

    def __post_init__(self):
        if self.T < 1 or not self.dt > 0 or not self.goal_radius > 0 or not self.control_bound > 0:
            raise DomainError("need T >= 1, dt > 0, goal_radius > 0, control_bound > 0")
        if any(v < 0 for v in self.noise_var):
            raise DomainError("noise variances must be nonnegative")
        if len(self.x0) != 4 or len(self.noise_var) != 4:
            raise DomainError("x0 and noise_var have 4 entries")
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    @property
    def n_controls(self) -> int:
        return 2 * self.T

    @property
    def n_scenario(self) -> int:
        return 2 + 4 * self.T

    def control_box(self) -> Box:
        return Box.cube(-self.control_bound, self.control_bound, self.n_controls)

    def scenario_model(self):
        noise = MultivariateNormal(np.zeros(4), np.diag(self.noise_var))
        return Product((ScaledBeta(*self.mass_beta), ScaledBeta(*self.drag_beta)) + (noise,) * self.T)

    def nominal_scenario(self) -> np.ndarray:
        """Mean mass and drag, zero disturbance."""
        d = np.zeros(self.n_scenario)
        d[0] = ScaledBeta(*self.mass_beta).mean()[0]
        d[1] = ScaledBeta(*self.drag_beta).mean()[0]
        return d

    # -- scenario file ------------------------------------------------------

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k != "obstacles"}
        d["obstacles"] = [{"normals": o.normals.tolist(), "offsets": o.offsets.tolist()} for o in self.obstacles]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "QuadrotorSpec":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise DomainError(f"unknown quadrotor settings: {sorted(unknown)}")
        kw = dict(d)
        if "obstacles" in kw:
            kw["obstacles"] = tuple(Polytope(o["normals"], o["offsets"]) for o in kw["obstacles"])
        for k in ("x0", "mass_beta", "drag_beta", "noise_var", "goal_center", "cost_weights"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "QuadrotorSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def rollout(spec: QuadrotorSpec, u, delta) -> np.ndarray:
    """States ``(..., T+1, 4)`` for controls ``(..., 2T)`` and scenarios ``(..., 2+4T)``."""
    u = np.asarray(u, dtype=float)
    delta = np.asarray(delta, dtype=float)
    T, dt = spec.T, spec.dt
    if u.shape[-1] != 2 * T or delta.shape[-1] != 2 + 4 * T:
        raise DomainError("control or scenario vector has the wrong length")
    m = delta[..., 0]
    if np.any(m <= 0):
        raise DomainError("mass must be positive")
    phi = delta[..., 1]
    shape = np.broadcast_shapes(u.shape[:-1], delta.shape[:-1])
    inv_m = np.broadcast_to(1.0 / m, shape)
    phi = np.broadcast_to(phi, shape)
    x = np.broadcast_to(np.asarray(spec.x0, dtype=float), shape + (4,)).copy()
    out = np.empty(shape + (T + 1, 4))
    out[..., 0, :] = x
    h2 = 0.5 * dt * dt
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(T):
            ux = u[..., 2 * t] * inv_m
            uy = u[..., 2 * t + 1] * inv_m
            w = delta[..., 2 + 4 * t : 6 + 4 * t]
            px, vx, py, vy = x[..., 0], x[..., 1], x[..., 2], x[..., 3]
            dx = phi * np.abs(vx) * vx
            dy = phi * np.abs(vy) * vy
            nxt = np.empty_like(x)
            nxt[..., 0] = px + dt * vx + h2 * ux - h2 * dx
            nxt[..., 1] = vx + dt * ux - dt * dx
            nxt[..., 2] = py + dt * vy + h2 * uy - h2 * dy
            nxt[..., 3] = vy + dt * uy - dt * dy
            x = nxt + w
            out[..., t + 1, :] = x
    if not np.all(np.isfinite(out)):
        raise NumericError("quadrotor rollout overflowed")
    return out


def goal_margin(states, spec: QuadrotorSpec) -> np.ndarray:
    pT = states[..., -1, [0, 2]]
    return np.linalg.norm(pT - np.asarray(spec.goal_center), axis=-1) - spec.goal_radius


def joint_margin(states, spec: QuadrotorSpec) -> np.ndarray:
    """Scalar constraint value; ``<= 0`` iff the goal is reached and no waypoint hits an obstacle."""
    states = np.asarray(states, dtype=float)
    h = goal_margin(states, spec)
    if spec.T >= 2 and spec.obstacles:
        pos = states[..., 1 : spec.T, :][..., [0, 2]]
        for obs in spec.obstacles:
            h = np.maximum(h, np.max(obs.depth(pos), axis=-1))
    return h


def joint_success(states, spec: QuadrotorSpec) -> np.ndarray:
    """Direct boolean check of the joint event, used as an oracle for :func:`joint_margin`."""
    states = np.asarray(states, dtype=float)
    pT = states[..., -1, [0, 2]]
    ok = np.linalg.norm(pT - np.asarray(spec.goal_center), axis=-1) <= spec.goal_radius
    pos = states[..., 1 : spec.T, :][..., [0, 2]]
    for obs in spec.obstacles:
        strictly_inside = np.all(pos @ obs.normals.T < obs.offsets, axis=-1)
        ok &= ~np.any(strictly_inside, axis=-1)
    return ok


def trajectory_cost(spec: QuadrotorSpec, states, u) -> np.ndarray:
    """Mean squared per-step displacement plus ``0.1/T`` times the control energy."""
    states = np.asarray(states, dtype=float)
    u = np.asarray(u, dtype=float)
    wx, wu = spec.cost_weights
    p = states[..., [0, 2]]
    step = np.diff(p, axis=-2)
    lx = np.sum(step * step, axis=(-1, -2)) / spec.T
    lu = np.sum(u * u, axis=-1) / spec.T
    return wx * lx + wu * lu


def as_problem(spec: QuadrotorSpec = None, alpha: float = 0.15) -> Problem:
    """Wrap the quadrotor as a :class:`Problem` over control trajectories.

    The cost is the realized trajectory cost averaged over ``spec.cost_scenarios``
    scenarios drawn once from a dedicated stream, so it is a deterministic
    function of the controls.
    """
    spec = spec or QuadrotorSpec()
    model = spec.scenario_model()
    cost_set = sample_scenarios(model, spec.cost_scenarios, RngStream(spec.cost_seed, QUAD_COST_STREAM)).scenarios

    def cost_fn(U):
        U = np.asarray(U, dtype=float)
        out = np.empty(U.shape[:-1])
        flat_u = U.reshape(-1, U.shape[-1])
        flat_out = out.reshape(-1)
        for k in range(0, flat_u.shape[0], 256):
            blk = flat_u[k : k + 256, None, :]
            flat_out[k : k + 256] = trajectory_cost(spec, rollout(spec, blk, cost_set[None]), blk).mean(axis=-1)
        return out

    def constraint_fn(U, D):
        return joint_margin(rollout(spec, U, D), spec)[..., None]

    def scenario_cost_fn(U, D):
        return trajectory_cost(spec, rollout(spec, U, D), U)

    return Problem(
        id="quadrotor",
        n=spec.n_controls,
        s=spec.n_scenario,
        m=1,
        box=spec.control_box(),
        alpha=alpha,
        cost_fn=cost_fn,
        constraint_fn=constraint_fn,
        scenario_model=model,
        scenario_cost_fn=scenario_cost_fn,
        meta={"spec": spec},
    )


# -- candidate control trajectories -----------------------------------------


def _nominal_final(spec, U, axis):
    d = spec.nominal_scenario()
    return rollout(spec, U, d)[..., -1, 2 * axis]


def sample_trajectory_controls(spec: QuadrotorSpec, S: int, stream: RngStream, knots: int = 4, goal_jitter: float = 1.0) -> DecisionSampleSet:
    """Smooth random control trajectories that nominally end near the goal.

    Each axis gets a piecewise-linear control profile through ``knots`` random
    values; a constant per-axis offset, found by bisection on the nominal
    model (mean mass and drag, no disturbance), then steers the nominal final
    position to a point drawn uniformly within ``goal_jitter`` of the goal
    center.  Results are clipped to the control box.
    """
    if S < 1:
        raise DomainError("S must be at least 1")
    rng = stream.generator()
    T, ub = spec.T, spec.control_bound
    grid = np.linspace(0.0, 1.0, knots)
    tt = np.arange(T) / max(T - 1, 1)
    vals = rng.uniform(-0.5 * ub, 0.5 * ub, size=(S, 2, knots))
    base = np.empty((S, 2, T))
    for k in range(S):
        for a in range(2):
            base[k, a] = np.interp(tt, grid, vals[k, a])
    r = goal_jitter * np.sqrt(rng.random(S))
    ang = 2 * np.pi * rng.random(S)
    target = np.asarray(spec.goal_center) + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)

    U = np.empty((S, 2 * T))
    U[:, 0::2] = base[:, 0]
    U[:, 1::2] = base[:, 1]
    for a in range(2):
        lo = np.full(S, -2.0 * ub)
        hi = np.full(S, 2.0 * ub)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            trial = U.copy()
            trial[:, a::2] = base[:, a] + mid[:, None]
            # final position is increasing in a constant control offset
            above = _nominal_final(spec, np.clip(trial, -ub, ub), a) > target[:, a]
            hi = np.where(above, mid, hi)
            lo = np.where(above, lo, mid)
        U[:, a::2] = base[:, a] + (0.5 * (lo + hi))[:, None]
    return DecisionSampleSet(np.clip(U, -ub, ub), Origin.TRAJECTORY)


def dump_trajectory_csv(states, path) -> None:
    states = np.asarray(states, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "p_x", "v_x", "p_y", "v_y"])
        for t, row in enumerate(states):
            w.writerow([t] + [repr(float(v)) for v in row])
