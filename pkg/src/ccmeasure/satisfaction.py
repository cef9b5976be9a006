"""Indicator satisfaction matrices and empirical constraint probabilities."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import DomainError, NumericError
from .problem import Problem, exact_prob_toy1d
from .sampling import DecisionSampleSet, ScenarioSampleSet

__all__ = [
    "SatisfactionMatrix",
    "build_matrix",
    "row_counts",
    "exact_prob_toy1d",
    "weighted_satisfaction",
    "dump_matrix",
    "load_matrix",
]

MAGIC = b"CCSATM01"
# bound on booleans materialised per block during construction
_BLOCK_CELLS = 1 << 20


@dataclass(frozen=True, eq=False)
class SatisfactionMatrix:
    """Bit-packed S x N indicator matrix.

    ``packed`` holds each row padded to whole bytes (numpy ``packbits`` with
    big-endian bit order); ``counts`` are the integer row sums and ``q`` is
    ``counts / N``.
    """

    packed: np.ndarray
    counts: np.ndarray
    N: int
    gamma: float

    @property
    def S(self) -> int:
        return self.counts.size

    @property
    def q(self) -> np.ndarray:
        return self.counts / self.N

    def q_exact(self, i: int) -> Fraction:
        return Fraction(int(self.counts[i]), self.N)

    @property
    def bits(self) -> np.ndarray:
        return np.unpackbits(self.packed, axis=1, count=self.N).astype(bool)

    @classmethod
    def from_bits(cls, bits, gamma: float = 0.0) -> "SatisfactionMatrix":
        bits = np.atleast_2d(np.asarray(bits, dtype=bool))
        return cls(
            packed=np.packbits(bits, axis=1),
            counts=bits.sum(axis=1, dtype=np.int64),
            N=bits.shape[1],
            gamma=float(gamma),
        )


def _bits_block(problem: Problem, X: np.ndarray, D: np.ndarray, gamma: float) -> np.ndarray:
    h = np.asarray(problem.constraint_fn(X[:, None, :], D[None, :, :]), dtype=float)
    if not np.all(np.isfinite(h)):
        raise NumericError("constraint evaluation produced non-finite values")
    return np.all(h + gamma <= 0.0, axis=-1)


def _check_dims(problem, X, D, gamma):
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    if X.shape[1] != problem.n:
        raise DomainError(f"decision samples have dimension {X.shape[1]}, problem expects {problem.n}")
    if D.shape[1] != problem.s:
        raise DomainError(f"scenarios have dimension {D.shape[1]}, problem expects {problem.s}")


def build_matrix(problem: Problem, xs: DecisionSampleSet, ds: ScenarioSampleSet, gamma: float = 0.0) -> SatisfactionMatrix:
    X, D = xs.points, ds.scenarios
    _check_dims(problem, X, D, gamma)
    S, N = X.shape[0], D.shape[0]
    rows = max(1, _BLOCK_CELLS // max(N, 1))
    packed = np.empty((S, (N + 7) // 8), dtype=np.uint8)
    counts = np.empty(S, dtype=np.int64)
    for start in range(0, S, rows):
        b = _bits_block(problem, X[start : start + rows], D, gamma)
        packed[start : start + rows] = np.packbits(b, axis=1)
        counts[start : start + rows] = b.sum(axis=1)
    return SatisfactionMatrix(packed=packed, counts=counts, N=N, gamma=float(gamma))


def row_counts(problem: Problem, X, D, gamma: float = 0.0) -> np.ndarray:
    """Integer satisfaction counts per decision row without keeping the bits.

    Uses the problem's structural fast path when it has one.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    _check_dims(problem, X, D, gamma)
    if problem.count_fn is not None:
        return np.asarray(problem.count_fn(X, D, gamma), dtype=np.int64)
    rows = max(1, _BLOCK_CELLS // max(D.shape[0], 1))
    out = np.empty(X.shape[0], dtype=np.int64)
    for start in range(0, X.shape[0], rows):
        out[start : start + rows] = _bits_block(problem, X[start : start + rows], D, gamma).sum(axis=1)
    return out


def weighted_satisfaction(q, mu) -> float:
    """``sum_i mu[i] * q[i]`` for a probability vector ``mu``."""
    q = np.asarray(q, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if mu.shape != q.shape:
        raise DomainError("weights and satisfaction vector differ in length")
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > 1e-12:
        raise DomainError("weights must be nonnegative and sum to 1")
    return float(mu @ q)


def dump_matrix(sat: SatisfactionMatrix, path) -> None:
    """Write ``MAGIC, S, N (uint64 LE), gamma (float64 LE)`` then the packed rows."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<QQd", sat.S, sat.N, sat.gamma))
        fh.write(np.ascontiguousarray(sat.packed, dtype=np.uint8).tobytes())


def load_matrix(path) -> SatisfactionMatrix:
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise DomainError(f"{path}: not a satisfaction matrix dump")
        S, N, gamma = struct.unpack("<QQd", fh.read(24))
        width = (N + 7) // 8
        packed = np.frombuffer(fh.read(S * width), dtype=np.uint8).reshape(S, width).copy()
    bits = np.unpackbits(packed, axis=1, count=N)
    return SatisfactionMatrix(packed=packed, counts=bits.sum(axis=1, dtype=np.int64), N=int(N), gamma=gamma)
