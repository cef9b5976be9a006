"""Seeded random generation of decision samples and scenarios.

Every consumer draws from an :class:`RngStream` identified by ``(seed,
stream_id)``.  The stream is turned into a fresh Philox generator keyed by a
``SeedSequence`` whose spawn key is the stream id, so substreams never share
state and consuming one cannot shift another.  Normal deviates come from
numpy's ziggurat sampler; Beta deviates use the Gamma ratio
``G_a / (G_a + G_b)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DomainError
from .problem import Box

MASK64 = (1 << 64) - 1

# stream-id conventions; validation ids sit far from every solver id so that
# out-of-sample checks never reuse solver randomness
DECISION_STREAM = 1
SCENARIO_STREAM = 2
GMM_STREAM = 16  # restarts use GMM_STREAM + r
QUAD_COST_STREAM = 64
VALIDATION_STREAM = 1 << 40


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & MASK64)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, offset: int) -> "RngStream":
        return RngStream(self.seed, self.stream_id + offset)


class Origin(str, Enum):
    UNIFORM = "uniform"
    GRID = "grid"
    TRAJECTORY = "trajectory"


@dataclass(frozen=True, eq=False)
class DecisionSampleSet:
    points: np.ndarray
    origin: Origin

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] < 1:
            raise DomainError("a decision sample set needs at least one point")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    def prefix(self, S: int) -> "DecisionSampleSet":
        return DecisionSampleSet(self.points[:S], self.origin)


@dataclass(frozen=True, eq=False)
class ScenarioSampleSet:
    scenarios: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.scenarios, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.shape[0] < 1:
            raise DomainError("a scenario sample set needs at least one scenario")
        d.flags.writeable = False
        object.__setattr__(self, "scenarios", d)

    def __len__(self):
        return self.scenarios.shape[0]


def sample_decisions_uniform(box: Box, S: int, stream: RngStream) -> DecisionSampleSet:
    if S < 1:
        raise DomainError("S must be at least 1")
    u = stream.generator().random((S, box.n))
    return DecisionSampleSet(box.lower + u * box.width, Origin.UNIFORM)


def grid_decisions(box: Box, step: float) -> DecisionSampleSet:
    """Axis-aligned lattice with both endpoints, built from integer step counts."""
    if step <= 0:
        raise DomainError("grid step must be positive")
    axes = []
    for lo, hi in zip(box.lower, box.upper):
        ratio = (hi - lo) / step
        k = int(round(ratio))
        if k < 1:
            raise DomainError(f"grid step {step} exceeds box width {hi - lo}")
        if abs(ratio - k) > 1e-6 * max(1.0, ratio):
            raise DomainError(f"grid step {step} does not divide box width {hi - lo}")
        axes.append(lo + (hi - lo) * np.arange(k + 1) / k)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=-1)
    return DecisionSampleSet(pts, Origin.GRID)


# -- scenario models -------------------------------------------------------


class ScenarioModel:
    dim: int

    def draw(self, rng: np.random.Generator, N: int) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def mean(self) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class Normal(ScenarioModel):
    loc: float = 0.0
    var: float = 1.0

    def __post_init__(self):
        if not self.var > 0:
            raise DomainError("normal variance must be positive")

    @property
    def dim(self):
        return 1

    def draw(self, rng, N):
        return (self.loc + np.sqrt(self.var) * rng.standard_normal(N))[:, None]

    def mean(self):
        return np.array([self.loc])


@dataclass(frozen=True, eq=False)
class MultivariateNormal(ScenarioModel):
    loc: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.loc, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mu.size, mu.size) or not np.allclose(cov, cov.T):
            raise DomainError("covariance must be a symmetric matrix matching the mean")
        w = np.linalg.eigvalsh(cov)
        if np.any(w < -1e-12):
            raise DomainError("covariance must be positive semidefinite")
        # PSD square root so that zero-variance coordinates stay exactly at the mean
        vals, vecs = np.linalg.eigh(cov)
        if np.allclose(cov, np.diag(np.diag(cov))):
            root = np.diag(np.sqrt(np.clip(np.diag(cov), 0.0, None)))
        else:
            root = vecs @ np.diag(np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
        object.__setattr__(self, "loc", mu)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "_root", root)

    @property
    def dim(self):
        return self.loc.size

    def draw(self, rng, N):
        z = rng.standard_normal((N, self.dim))
        return self.loc + z @ self._root.T

    def mean(self):
        return self.loc.copy()


@dataclass(frozen=True)
class ScaledBeta(ScenarioModel):
    """``loc + scale * Beta(a, b)``."""

    a: float
    b: float
    loc: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise DomainError("Beta shapes must be positive")
        if not self.scale > 0:
            raise DomainError("Beta scale must be positive")

    @property
    def dim(self):
        return 1

    def draw(self, rng, N):
        ga = rng.standard_gamma(self.a, N)
        gb = rng.standard_gamma(self.b, N)
        return (self.loc + self.scale * ga / (ga + gb))[:, None]

    def mean(self):
        return np.array([self.loc + self.scale * self.a / (self.a + self.b)])


@dataclass(frozen=True)
class Product(ScenarioModel):
    """Independent components concatenated left to right."""

    parts: tuple

    @property
    def dim(self):
        return sum(p.dim for p in self.parts)

    def draw(self, rng, N):
        return np.concatenate([p.draw(rng, N) for p in self.parts], axis=1)

    def mean(self):
        return np.concatenate([p.mean() for p in self.parts])


def sample_scenarios(model: ScenarioModel, N: int, stream: RngStream) -> ScenarioSampleSet:
    if N < 1:
        raise DomainError("N must be at least 1")
    return ScenarioSampleSet(model.draw(stream.generator(), N))
