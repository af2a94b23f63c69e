"""Localization scheme A: deterministic uniform grouping.

The alphabet [d] is split into M = ceil(d / (2^b - 1)) consecutive blocks of
(at most) 2^b - 1 symbols.  Client i is responsible for block
((i-1) mod M) + 1 and reports the 1-based offset of its sample inside that
block, or 0 if the sample falls elsewhere.  The decoder inverts the offset:
symbol = (m - 1)(2^b - 1) + Y.  A symbol with probability >= alpha is missed
only if none of the ~n1/M clients of its block observe it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ClientSamples, MessageLog, SupportEstimate
from .rng import StageTag, Stream, derive_stream


@dataclass(frozen=True)
class GroupingLayout:
    d: int
    b: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"alphabet size must be >= 1, got {self.d}")
        if self.b < 1:
            raise ValueError(f"bit budget must be >= 1, got {self.b}")

    @property
    def block_size(self) -> int:
        # Clamp to d when the budget already covers the whole alphabet.
        return min((1 << self.b) - 1, self.d)

    @property
    def num_groups(self) -> int:
        return math.ceil(self.d / self.block_size)

    def block(self, m: int) -> range:
        """Symbols covered by block m (1-indexed), as a 1-based range."""
        if not 1 <= m <= self.num_groups:
            raise ValueError(f"block index {m} outside [1, {self.num_groups}]")
        lo = (m - 1) * self.block_size + 1
        return range(lo, min(m * self.block_size, self.d) + 1)

    def group_of(self, i: int) -> int:
        """Deterministic round-robin client-to-block assignment."""
        if i < 1:
            raise ValueError(f"client index must be >= 1, got {i}")
        return (i - 1) % self.num_groups + 1


def assign_groups(
    layout: GroupingLayout, n1: int, stream: Stream | None = None
) -> np.ndarray:
    """Block assignment for clients 1..n1.

    Deterministic round-robin by default; with a GroupAssignment stream the
    assignment is uniform i.i.d. instead (the distribution-free variant).
    """
    if stream is None:
        return (np.arange(n1, dtype=np.int64) % layout.num_groups) + 1
    if stream.tag is not StageTag.GROUP_ASSIGNMENT:
        raise ValueError(f"group assignment requires the GroupAssignment stream, got {stream.tag}")
    return stream.generator().integers(1, layout.num_groups + 1, size=n1, dtype=np.int64)


def encode_grouped(x: int, m: int, layout: GroupingLayout) -> int:
    """Message of a client assigned block m observing symbol x."""
    if not 1 <= x <= layout.d:
        raise ValueError(f"symbol {x} outside [1, {layout.d}]")
    offset = x - (m - 1) * layout.block_size
    if 1 <= offset <= layout.block_size:
        return offset
    return 0


def encode_grouped_stage(
    samples: ClientSamples, groups: np.ndarray, layout: GroupingLayout
) -> MessageLog:
    offsets = samples.values - (groups - 1) * layout.block_size
    messages = np.where((offsets >= 1) & (offsets <= layout.block_size), offsets, 0)
    return MessageLog(layout.b, messages)


def decode_grouped(messages: MessageLog, groups: np.ndarray, layout: GroupingLayout) -> SupportEstimate:
    """Union of symbols signalled by nonzero messages."""
    y = messages.messages
    nz = y > 0
    symbols = (groups[nz] - 1) * layout.block_size + y[nz]
    if symbols.size and symbols.max() > layout.d:
        raise ValueError("decoded symbol outside the alphabet; corrupt message log")
    return SupportEstimate(tuple(np.unique(symbols)), {"scheme": "A"})


def localize_grouped(
    samples: ClientSamples,
    layout: GroupingLayout,
    assignment_stream: Stream | None = None,
) -> SupportEstimate:
    groups = assign_groups(layout, samples.n, assignment_stream)
    return decode_grouped(encode_grouped_stage(samples, groups, layout), groups, layout)


def grouping_failure_bound(n1: int, alpha: float, b: int, d: int, s: int) -> float:
    """Pr{some symbol with p_j >= alpha is missed} <= s exp(-n1 (2^b-1) alpha / d)."""
    return s * math.exp(-n1 * ((1 << b) - 1) * alpha / d)


def localization_stream(master_seed: int) -> Stream:
    """Scheme A uses no per-client channel randomness; provided for interface
    symmetry with the hashing schemes."""
    return derive_stream(master_seed, StageTag.LOCALIZATION)
