"""Localization scheme B: non-uniform random hashing, exhaustive decoding.

Each client draws i.i.d. labels L(x) over [1 .. 2^b] with Pr{L = y} = 1/s for
y < 2^b and the remaining 1 - (2^b-1)/s on 2^b, and reports L(X_i).  The
decoder searches all s-subsets of [d] for one that explains every message
(each client's label matches at least one candidate symbol) and picks
uniformly among the consistent ones, so the estimate always has exactly s
symbols.  Exponential-time by design; the group-testing scheme is the
polynomial-time alternative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations, islice

import numpy as np

from . import kernels
from .core import ClientSamples, MessageLog, SupportEstimate
from .rng import StageTag, Stream, sm64, stream_keys

ENUMERATION_CAP = 2_000_000
_CHUNK = 65536


@dataclass(frozen=True)
class NonUniformHashChannel:
    """One client's label map L: [d] -> [1 .. 2^b] with the skewed law above."""

    key: int
    b: int
    s: int
    d: int

    def __post_init__(self):
        if (1 << self.b) - 1 > self.s:
            raise ValueError(
                f"need 2^b - 1 <= s for the label law, got b={self.b}, s={self.s}"
            )

    def label(self, x: int) -> int:
        if not 1 <= x <= self.d:
            raise ValueError(f"symbol {x} outside [1, {self.d}]")
        u = sm64(self.key, x)
        v = ((u >> 32) * self.s) >> 32
        top = (1 << self.b) - 1
        return v + 1 if v < top else top + 1

    def labels(self, xs: np.ndarray) -> np.ndarray:
        keys = np.full(len(xs), self.key, dtype=np.uint64)
        return kernels.nonuniform_labels(keys, np.asarray(xs, dtype=np.uint64), self.b, self.s)


@dataclass(frozen=True)
class CandidateSupport:
    symbols: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(sorted(self.symbols)))
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("candidate symbols must be distinct")


def localization_keys(master_seed: int, client_indices: np.ndarray) -> np.ndarray:
    return stream_keys(master_seed, StageTag.LOCALIZATION, client_indices)


def encode_nonuniform(x: int, channel: NonUniformHashChannel) -> int:
    return channel.label(x)


def encode_nonuniform_stage(
    samples: ClientSamples, keys: np.ndarray, b: int, s: int
) -> MessageLog:
    if (1 << b) - 1 > s:
        raise ValueError(f"need 2^b - 1 <= s, got b={b}, s={s}")
    labels = kernels.nonuniform_labels(
        np.asarray(keys, dtype=np.uint64), samples.values.astype(np.uint64), b, s
    )
    return MessageLog(b, labels - 1)


def _label_matrix(keys: np.ndarray, d: int, b: int, s: int) -> np.ndarray:
    return kernels.nonuniform_label_matrix(np.asarray(keys, dtype=np.uint64), d, b, s)


def is_consistent(
    candidate, keys: np.ndarray, messages: MessageLog, d: int, s: int
) -> bool:
    """True iff every message equals the label of some candidate symbol."""
    symbols = candidate.symbols if isinstance(candidate, CandidateSupport) else tuple(candidate)
    if len(keys) != messages.n:
        raise ValueError("channels and messages must align by client index")
    lab = _label_matrix(keys, d, b=messages.b, s=s)
    cand = np.asarray([symbols], dtype=np.int64)
    return int(kernels.candidate_violations(lab, messages.messages, cand)[0]) == 0


def _scan_candidates(keys, messages, d, s, cap):
    """Yield (candidate_array, violations) over all s-subsets, in lex order."""
    total = math.comb(d, s)
    if total > cap:
        raise ValueError(
            f"C({d},{s}) = {total} candidate supports exceeds the enumeration cap {cap}"
        )
    lab = _label_matrix(keys, d, b=messages.b, s=s)
    it = combinations(range(1, d + 1), s)
    while True:
        batch = list(islice(it, _CHUNK))
        if not batch:
            return
        arr = np.asarray(batch, dtype=np.int64)
        yield arr, kernels.candidate_violations(lab, messages.messages, arr)


def _uniform_pick(candidates: list[tuple[int, ...]], decoder_stream: Stream) -> tuple[int, ...]:
    # candidates arrive in lexicographic order (deterministic reduction), so
    # the pick depends only on the decoder stream, not on scan scheduling.
    idx = int(decoder_stream.generator().integers(len(candidates)))
    return candidates[idx]


def decode_exhaustive(
    keys: np.ndarray,
    messages: MessageLog,
    d: int,
    s: int,
    decoder_stream: Stream,
    cap: int = ENUMERATION_CAP,
) -> SupportEstimate:
    """Uniformly random consistent s-subset; raises if none exists."""
    consistent: list[tuple[int, ...]] = []
    for arr, viol in _scan_candidates(keys, messages, d, s, cap):
        for row in arr[viol == 0]:
            consistent.append(tuple(int(v) for v in row))
    if not consistent:
        raise RuntimeError(
            "no consistent candidate support; messages were not generated by an s-sparse source"
        )
    pick = _uniform_pick(consistent, decoder_stream)
    return SupportEstimate(pick, {"scheme": "B", "num_consistent": len(consistent)})


def decode_almost_sparse(
    keys: np.ndarray,
    messages: MessageLog,
    d: int,
    s: int,
    decoder_stream: Stream,
    cap: int = ENUMERATION_CAP,
) -> SupportEstimate:
    """Like decode_exhaustive, with a minimum-violation fallback.

    When no candidate is consistent (possible once p has tail mass outside
    every s-subset), return the candidate violating the fewest client
    constraints, ties broken lexicographically.
    """
    consistent: list[tuple[int, ...]] = []
    best: tuple[int, ...] | None = None
    best_viol = np.iinfo(np.int64).max
    for arr, viol in _scan_candidates(keys, messages, d, s, cap):
        for row in arr[viol == 0]:
            consistent.append(tuple(int(v) for v in row))
        if not consistent:
            k = int(viol.argmin())
            if int(viol[k]) < best_viol:
                best_viol = int(viol[k])
                best = tuple(int(v) for v in arr[k])
    if consistent:
        pick = _uniform_pick(consistent, decoder_stream)
        return SupportEstimate(pick, {"scheme": "B", "num_consistent": len(consistent)})
    assert best is not None
    return SupportEstimate(best, {"scheme": "B", "num_consistent": 0, "violations": best_viol})


def exact_distinguish_probability(s: int, b: int, candidate_size: int | None = None) -> float:
    """Pr over a fresh channel that L(j) differs from L(j') for all j' in a
    candidate set of the given size (default s).  Exact, by enumerating the
    label law; symbols' labels are i.i.d."""
    c = s if candidate_size is None else candidate_size
    top = (1 << b) - 1
    if top > s:
        raise ValueError(f"need 2^b - 1 <= s, got b={b}, s={s}")
    p_low = 1.0 / s  # each label 1 .. 2^b - 1
    p_top = 1.0 - top / s  # label 2^b
    return top * p_low * (1 - p_low) ** c + p_top * (1 - p_top) ** c


def distinguish_probability_check(
    master_seed: int, candidate, j: int, s: int, b: int, d: int, trials: int = 4000
) -> float:
    """Empirical Pr{all candidate labels differ from j's label} over fresh
    channels; the Lemma-level guarantee is >= (2^b - 1)/(4s) for s >= 2."""
    symbols = tuple(candidate.symbols if isinstance(candidate, CandidateSupport) else candidate)
    if j in symbols:
        raise ValueError(f"symbol {j} must not belong to the candidate set")
    keys = stream_keys(master_seed, StageTag.LOCALIZATION, np.arange(1, trials + 1))
    cols = np.asarray(symbols + (j,), dtype=np.int64)
    lab = kernels.nonuniform_label_matrix(keys, d, b, s)[:, cols - 1]
    distinguished = (lab[:, :-1] != lab[:, -1:]).all(axis=1)
    return float(distinguished.mean())


def distinguish_lower_bound(s: int, b: int) -> float:
    return ((1 << b) - 1) / (4 * s)


def hashing_failure_bound(n1: int, alpha: float, b: int, s: int, d: int) -> float:
    """Pr{J_alpha not within the estimate}
    <= exp(-n1 alpha (2^b - 1)/(4s) + union term).

    The union term upper-bounds ln C(d,s) via C(d,s) <= (ed/s)^s, i.e.
    s*(1 + ln(d/s)); the failure exponent per wrong candidate is the
    distinguishability rate alpha*(2^b-1)/(4s) per client.
    """
    union = s * (1.0 + math.log(d / s)) if d > s else float(s)
    return math.exp(-n1 * alpha * ((1 << b) - 1) / (4 * s) + union)
