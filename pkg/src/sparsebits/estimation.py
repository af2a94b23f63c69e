"""Second-stage frequency estimation from b-bit hashed messages.

Each estimation client i applies an independent uniform hash h_i: [d] -> [2^b]
to its sample and sends the label.  For any symbol j, the event
{h_i(j) = h_i(X_i)} has probability

    b_j = (p_j (2^b - 1) + 1) / 2^b,

so the match count N_j over n2 clients is Binomial(n2, b_j) and

    p_hat_j = (N_j / n2) * 2^b / (2^b - 1) - 1 / (2^b - 1)

is exactly unbiased for p_j (confirmed by a rational-arithmetic enumeration
oracle in the tests).  Estimates are reported for the localized support only;
all other coordinates are 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .core import MessageLog
from .rng import StageTag, sm64, stream_keys


@dataclass(frozen=True)
class UniformHashChannel:
    """One client's hash h: [d] -> [2^b], labels uniform on [1 .. 2^b]."""

    key: int
    b: int
    d: int

    def label(self, x: int) -> int:
        if not 1 <= x <= self.d:
            raise ValueError(f"symbol {x} outside [1, {self.d}]")
        return 1 + (sm64(self.key, x) >> (64 - self.b))

    def labels(self, xs: np.ndarray) -> np.ndarray:
        keys = np.full(len(xs), self.key, dtype=np.uint64)
        return kernels.uniform_labels(keys, np.asarray(xs, dtype=np.uint64), self.b)


def estimation_keys(master_seed: int, client_indices: np.ndarray) -> np.ndarray:
    """Stage-2 channel keys; derived from the Estimation tag only."""
    return stream_keys(master_seed, StageTag.ESTIMATION, client_indices)


def encode_estimation(x: int, channel: UniformHashChannel) -> int:
    """The label h(x) a client reports for sample x."""
    return channel.label(x)


def encode_estimation_stage(values: np.ndarray, keys: np.ndarray, b: int) -> MessageLog:
    """All stage-2 messages at once; wire value is label - 1."""
    labels = kernels.uniform_labels(keys, np.asarray(values, dtype=np.uint64), b)
    return MessageLog(b, labels - 1)


def collision_probability(p_j: float, b: int) -> float:
    """Pr{h(j) = h(X)} when X ~ p: the Binomial success rate for N_j."""
    B = 1 << b
    return (p_j * (B - 1) + 1) / B


def estimator_variance_exact(p_j: float, b: int, n2: int) -> float:
    """Exact Var(p_hat_j): (2^b/(2^b-1))^2 * b_j(1-b_j) / n2."""
    B = 1 << b
    b_j = collision_probability(p_j, b)
    return (B / (B - 1)) ** 2 * b_j * (1.0 - b_j) / n2


def estimator_variance_bound(p_j: float, b: int, n2: int) -> float:
    """Var(p_hat_j) <= b_j / n2, the bound used by the error analysis.

    Valid whenever p_j >= 1/2^b: the exact variance equals
    (1 - p_j) * 2^b/(2^b-1) times this bound, a factor <= 1 exactly on that
    domain.  For p_j < 1/2^b the true variance can exceed b_j/n2 by up to
    2^b/(2^b-1) <= 2x; callers comparing samples against this bound should
    restrict to symbols with p_j >= 1/2^b or use the exact form.
    """
    return collision_probability(p_j, b) / n2


def conditional_l2_bound(s: int, alpha: float, n2: int, b: int) -> float:
    """E[l2^2 | localization succeeded, |est. support| <= s]
    <= s*alpha^2 + s/(n2*2^b) + 1/n2."""
    return s * alpha**2 + s / (n2 * (1 << b)) + 1 / n2


def estimate_frequencies(
    messages: MessageLog,
    keys: np.ndarray,
    support: Sequence[int],
    d: int,
) -> np.ndarray:
    """Unbiased estimates on ``support`` from stage-2 messages; dense output.

    ``keys[i]`` must be the channel key that produced ``messages.messages[i]``.
    """
    n2 = messages.n
    if n2 == 0:
        raise ValueError("estimation requires at least one client")
    if len(keys) != n2:
        raise ValueError(f"got {len(keys)} channel keys for {n2} messages")
    estimate = np.zeros(d)
    support = np.asarray(sorted(support), dtype=np.int64)
    if support.size == 0:
        return estimate
    if support.min() < 1 or support.max() > d:
        raise ValueError(f"support symbols must lie in [1, {d}]")
    B = 1 << messages.b
    counts = kernels.match_counts(
        np.asarray(keys, dtype=np.uint64), messages.messages, support, messages.b
    )
    estimate[support - 1] = (counts / n2) * B / (B - 1) - 1.0 / (B - 1)
    return estimate
