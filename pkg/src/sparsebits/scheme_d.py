"""Localization scheme D: sequentially interactive prefix search.

Symbols are leaves of a depth-log2(d) binary tree (symbol j <-> the bit
string of j-1, MSB first).  Round t refines the surviving length-(t-1)
prefixes: their one-bit extensions are the round's candidates, split into
blocks of 2^b - 1, and each round-t client reports the in-block position of
its sample's length-t prefix (0 if it falls outside the client's block).
Decoding inverts the position; only signalled candidates can survive, so
every decoded prefix is a true prefix of some observed sample.

No per-client hash randomness is involved: the only randomness is the data
(and, in the distribution-free variant, the shared group assignment).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ClientSamples, MessageLog, SupportEstimate
from .rng import StageTag, Stream


@dataclass(frozen=True)
class PrefixSet:
    """Prefixes of length t, stored as integers in [0, 2^t)."""

    t: int
    prefixes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "prefixes", tuple(sorted(self.prefixes)))
        if self.t < 0:
            raise ValueError("prefix length must be >= 0")
        if len(set(self.prefixes)) != len(self.prefixes):
            raise ValueError("prefixes must be distinct")
        limit = 1 << self.t
        for v in self.prefixes:
            if not 0 <= v < limit:
                raise ValueError(f"{v} is not a {self.t}-bit prefix")

    def bitstrings(self) -> tuple[str, ...]:
        return tuple(format(v, f"0{self.t}b") if self.t else "" for v in self.prefixes)


ROOT = PrefixSet(0, (0,))


def expand_candidates(prev: PrefixSet) -> tuple[int, ...]:
    """Both one-bit extensions of every surviving prefix, sorted."""
    out = []
    for v in prev.prefixes:
        out.extend(((v << 1), (v << 1) | 1))
    return tuple(sorted(out))


@dataclass(frozen=True)
class RoundLayout:
    """Everything a round-t client may see: the candidate list and the
    block structure.  Never contains other clients' samples."""

    t: int
    b: int
    rounds_total: int
    candidates: tuple[int, ...]

    @property
    def width(self) -> int:
        return (1 << self.b) - 1

    @property
    def num_blocks(self) -> int:
        return math.ceil(len(self.candidates) / self.width)

    def block(self, m: int) -> tuple[int, ...]:
        if not 1 <= m <= self.num_blocks:
            raise ValueError(f"block index {m} outside [1, {self.num_blocks}]")
        return self.candidates[(m - 1) * self.width : m * self.width]

    def client_round(self, i: int) -> int:
        """Round-robin round membership: G_t = {i : i = t (mod rounds)}."""
        return (i - 1) % self.rounds_total + 1

    def client_block(self, i: int) -> int:
        """Deterministic block assignment: rank within G_t, cycled over M."""
        rank = (i - 1) // self.rounds_total
        return rank % self.num_blocks + 1


def prefix_of(x: int, t: int, rounds_total: int) -> int:
    """Length-t prefix (as an integer) of symbol x's bit string."""
    return (x - 1) >> (rounds_total - t)


def encode_tree_round(x: int, i: int, layout: RoundLayout) -> int:
    """Position of x's prefix within client i's block, or 0."""
    if layout.client_round(i) != layout.t:
        raise ValueError(f"client {i} does not belong to round {layout.t}")
    if not layout.candidates:
        return 0
    pfx = prefix_of(x, layout.t, layout.rounds_total)
    block = layout.block(layout.client_block(i))
    try:
        return block.index(pfx) + 1
    except ValueError:
        return 0


def _encode_round(values: np.ndarray, ms: np.ndarray, layout: RoundLayout) -> np.ndarray:
    """Vectorized encode: messages for the round's clients, given their block
    assignment ``ms``."""
    if not layout.candidates:
        return np.zeros(len(values), dtype=np.int64)
    cand = np.asarray(layout.candidates, dtype=np.int64)
    pfx = (values - 1) >> (layout.rounds_total - layout.t)
    pos = np.searchsorted(cand, pfx)
    pos = np.minimum(pos, len(cand) - 1)
    found = cand[pos] == pfx
    gidx = pos + 1  # 1-based index into the sorted candidate list
    m_of_pfx = (gidx - 1) // layout.width + 1
    within = (gidx - 1) % layout.width + 1
    return np.where(found & (m_of_pfx == ms), within, 0).astype(np.int64)


def decode_tree_round(
    messages: MessageLog, ms: np.ndarray, layout: RoundLayout, s_cap: int | None = None
) -> PrefixSet:
    """Reconstruct signalled prefixes; keep the s_cap highest-multiplicity
    ones (ties to the lexicographically smaller prefix)."""
    y = messages.messages
    nz = y > 0
    if not nz.any() or not layout.candidates:
        if nz.any():
            raise ValueError("nonzero message against an empty candidate list")
        return PrefixSet(layout.t, ())
    gidx = y[nz] + (ms[nz] - 1) * layout.width
    if gidx.max() > len(layout.candidates):
        raise ValueError("reconstructed candidate index beyond the candidate list")
    counts = np.bincount(gidx - 1, minlength=len(layout.candidates))
    decoded = np.flatnonzero(counts)
    if s_cap is not None and decoded.size > s_cap:
        # highest multiplicity first, then smaller prefix: sort by (-count, prefix)
        order = np.lexsort((decoded, -counts[decoded]))
        decoded = decoded[order[:s_cap]]
    cand = np.asarray(layout.candidates, dtype=np.int64)
    return PrefixSet(layout.t, tuple(int(v) for v in cand[decoded]))


def run_tree_localization(
    samples: ClientSamples,
    d: int,
    s: int,
    b: int,
    assignment_stream: Stream | None = None,
) -> SupportEstimate:
    """Full log2(d)-round protocol over clients 1..n1.

    With ``assignment_stream`` (a GroupAssignment stream), both round
    membership and block assignment are uniform i.i.d. instead of
    round-robin: the distribution-free variant.
    """
    if d < 2 or d & (d - 1):
        raise ValueError(f"alphabet size must be a power of two >= 2, got {d}")
    R = d.bit_length() - 1
    n1 = samples.n
    if n1 < R:
        raise ValueError(f"need at least log2(d) = {R} clients, got {n1}")
    if (1 << b) - 1 > 2 * s:
        raise ValueError(f"need 2^b - 1 <= 2s, got b={b}, s={s}")

    gen = None
    if assignment_stream is not None:
        if assignment_stream.tag is not StageTag.GROUP_ASSIGNMENT:
            raise ValueError(
                f"group assignment requires the GroupAssignment stream, got {assignment_stream.tag}"
            )
        gen = assignment_stream.generator()
        t_assign = gen.integers(1, R + 1, size=n1, dtype=np.int64)
    else:
        t_assign = (np.arange(n1, dtype=np.int64) % R) + 1

    prev = ROOT
    round_sizes = []
    messages_sent = 0
    for t in range(1, R + 1):
        layout = RoundLayout(t=t, b=b, rounds_total=R, candidates=expand_candidates(prev))
        members = np.flatnonzero(t_assign == t)  # 0-based positions = client index - 1
        values = samples.values[members]
        if layout.candidates:
            if gen is not None:
                ms = gen.integers(1, layout.num_blocks + 1, size=members.size, dtype=np.int64)
            else:
                ranks = members // R
                ms = ranks % layout.num_blocks + 1
            y = _encode_round(values, ms, layout)
        else:
            ms = np.zeros(members.size, dtype=np.int64)
            y = np.zeros(members.size, dtype=np.int64)
        log = MessageLog(b, y)
        messages_sent += log.n
        decoded = decode_tree_round(log, ms, layout, s_cap=s)
        # prefix soundness: only prefixes of observed samples can be decoded
        observed = {int(v) for v in (values - 1) >> (R - t)}
        assert set(decoded.prefixes) <= observed, "decoded a prefix no round client observed"
        round_sizes.append(len(decoded.prefixes))
        prev = decoded

    assert messages_sent == n1, "every stage-1 client must speak exactly once"
    symbols = tuple(v + 1 for v in prev.prefixes)
    return SupportEstimate(symbols, {"scheme": "D", "round_sizes": round_sizes})


def tree_failure_bound(n1: int, alpha: float, b: int, d: int, s: int) -> float:
    """Pr{localization failure}
    <= log2(d) * (2s/(2^b-1)) * exp(-n1 (2^b-1) alpha / (2 s log2 d))."""
    R = math.log2(d)
    w = (1 << b) - 1
    return R * (2 * s / w) * math.exp(-n1 * w * alpha / (2 * s * R))
