"""Core types and operations: sparse distributions, client samples, metrics.

Symbols are 1-indexed throughout: a distribution on [d] assigns probability to
symbols 1..d.  Estimates are dense float vectors of length d (entry j-1 is the
estimate for symbol j) and may contain negative values, since the unbiased
estimator is reported unclipped; `project_simplex` is an optional
postprocessing step, used nowhere in measured paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .rng import Stream

_SUM_TOLERANCE = 1e-9


class SparseDistribution:
    """Probability distribution on [1..d] with explicit support.

    Immutable after construction; probabilities are renormalized to sum to 1
    in working precision.
    """

    __slots__ = ("d", "_probs")

    def __init__(self, d: int, probs: Mapping[int, float]):
        self.d = d
        self._probs = dict(probs)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(sorted(self._probs))

    @property
    def sparsity(self) -> int:
        return len(self._probs)

    def prob(self, j: int) -> float:
        return self._probs.get(j, 0.0)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.d)
        for j, pj in self._probs.items():
            out[j - 1] = pj
        return out

    def top_set(self, s: int) -> tuple[int, ...]:
        """The s highest-probability symbols, ties broken by lower index."""
        ranked = sorted(self._probs, key=lambda j: (-self._probs[j], j))
        return tuple(sorted(ranked[:s]))

    def head_mass(self, s: int) -> float:
        """Total probability of the s largest entries."""
        return float(sum(sorted(self._probs.values(), reverse=True)[:s]))

    def items(self):
        return self._probs.items()

    def __repr__(self) -> str:
        return f"SparseDistribution(d={self.d}, support={self.support})"


def make_sparse_distribution(
    d: int, support: Sequence[int], probs: Sequence[float]
) -> SparseDistribution:
    if d < 1:
        raise ValueError(f"alphabet size must be >= 1, got d={d}")
    support = list(support)
    probs = [float(p) for p in probs]
    if len(support) != len(probs):
        raise ValueError(f"support and probs length mismatch: {len(support)} vs {len(probs)}")
    if not support:
        raise ValueError("support must be non-empty")
    if len(set(support)) != len(support):
        raise ValueError("support symbols must be distinct")
    for j in support:
        if not 1 <= j <= d:
            raise ValueError(f"support symbol {j} outside [1, {d}]")
    for p in probs:
        if p <= 0:
            raise ValueError(f"support probabilities must be positive, got {p}")
    total = sum(probs)
    if abs(total - 1.0) > _SUM_TOLERANCE:
        raise ValueError(f"probabilities sum to {total}, beyond tolerance {_SUM_TOLERANCE}")
    return SparseDistribution(d, {j: p / total for j, p in zip(support, probs)})


@dataclass(frozen=True)
class ClientSamples:
    """One symbol per client, values in [1..d]."""

    d: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.int64)
        object.__setattr__(self, "values", v)
        if v.ndim != 1:
            raise ValueError("samples must be a 1-d sequence")
        if v.size and (v.min() < 1 or v.max() > self.d):
            raise ValueError(f"sample values must lie in [1, {self.d}]")

    @property
    def n(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class MessageLog:
    """b-bit messages, one per client, values in [0 .. 2^b - 1]."""

    b: int
    messages: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.messages, dtype=np.int64)
        object.__setattr__(self, "messages", m)
        if self.b < 1:
            raise ValueError(f"bit budget must be >= 1, got b={self.b}")
        if m.size and (m.min() < 0 or m.max() >= (1 << self.b)):
            raise ValueError(f"messages must fit in {self.b} bits")

    @property
    def n(self) -> int:
        return int(self.messages.size)

    @property
    def total_bits(self) -> int:
        return self.n * self.b


@dataclass(frozen=True)
class SupportEstimate:
    """Localization output: the estimated support set, plus diagnostics."""

    symbols: tuple[int, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(sorted(self.symbols)))

    def contains(self, required: Sequence[int]) -> bool:
        return set(required).issubset(self.symbols)


def sample_clients(p: SparseDistribution, n: int, stream: Stream) -> ClientSamples:
    """n i.i.d. draws from p via inverse-CDF on the stream's generator."""
    if n < 0:
        raise ValueError(f"sample count must be nonnegative, got {n}")
    support = np.array(p.support, dtype=np.int64)
    weights = np.array([p.prob(int(j)) for j in support])
    cdf = np.cumsum(weights)
    cdf[-1] = 1.0  # guard against float round-off at the top
    u = stream.generator().random(n)
    return ClientSamples(p.d, support[np.searchsorted(cdf, u, side="right")])


def empirical_dense(values: np.ndarray, d: int) -> np.ndarray:
    """Empirical distribution of a sample vector as a dense length-d vector."""
    v = np.asarray(values, dtype=np.int64)
    if v.size == 0:
        return np.zeros(d)
    return np.bincount(v - 1, minlength=d) / v.size


def _dense_of(x, d: int | None = None) -> np.ndarray:
    if isinstance(x, SparseDistribution):
        return x.dense()
    arr = np.asarray(x, dtype=float)
    if d is not None and arr.shape != (d,):
        raise ValueError(f"expected length-{d} vector, got shape {arr.shape}")
    return arr


def l2_sq(p, q) -> float:
    """Squared Euclidean distance between two distributions/estimates."""
    a, b = _dense_of(p), _dense_of(q)
    diff = a - b
    return float(diff @ diff)


def l1(p, q) -> float:
    a, b = _dense_of(p), _dense_of(q)
    return float(np.abs(a - b).sum())


def tv(p, q) -> float:
    """Total variation distance (half the l1 distance)."""
    return 0.5 * l1(p, q)


def project_simplex(estimate: np.ndarray) -> np.ndarray:
    """Clip negatives and renormalize.  Optional postprocessing only: the
    estimator's unbiasedness (which the tests measure) does not survive it."""
    clipped = np.clip(np.asarray(estimate, dtype=float), 0.0, None)
    total = clipped.sum()
    if total <= 0:
        return np.full_like(clipped, 1.0 / clipped.size)
    return clipped / total
