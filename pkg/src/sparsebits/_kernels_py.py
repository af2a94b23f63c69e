"""numpy implementations of the hot kernels.

This is the fallback backend; `_kernels_cy.pyx` implements the same functions
with fused loops.  The two must produce bit-identical outputs, which is why
everything here is integer arithmetic on uint64 (no float anywhere).

Conventions shared by both backends:
  * hash labels live in [1 .. 2^b]; wire messages in [0 .. 2^b - 1], with
    wire = label - 1 for hash-type schemes;
  * symbols are 1-indexed;
  * ``keys`` are per-client stream keys (see rng.stream_keys).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_U1 = np.uint64(1)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * _M1
    z = z ^ (z >> np.uint64(27))
    z = z * _M2
    return z ^ (z >> np.uint64(31))


def sm64_array(state: int, counters: np.ndarray) -> np.ndarray:
    """splitmix64 outputs at the given counters from ``state``."""
    c = np.asarray(counters, dtype=np.uint64)
    return _mix64(np.uint64(state) + _GAMMA * (c + _U1))


def uniform_labels(keys: np.ndarray, xs: np.ndarray, b: int) -> np.ndarray:
    """h_i(x_i) for each (key, symbol) pair; labels uniform on [1 .. 2^b]."""
    u = _mix64(np.asarray(keys, dtype=np.uint64) + _GAMMA * (np.asarray(xs, dtype=np.uint64) + _U1))
    return ((u >> np.uint64(64 - b)) + _U1).astype(np.int64)


def uniform_label_matrix(keys: np.ndarray, d: int, b: int) -> np.ndarray:
    """(n, d) matrix of labels h_i(x) for x = 1..d."""
    k = np.asarray(keys, dtype=np.uint64)[:, None]
    xs = np.arange(1, d + 1, dtype=np.uint64)[None, :]
    u = _mix64(k + _GAMMA * (xs + _U1))
    return ((u >> np.uint64(64 - b)) + _U1).astype(np.int64)


def _nonuniform_from_words(u: np.ndarray, b: int, s: int) -> np.ndarray:
    v = ((u >> np.uint64(32)) * np.uint64(s)) >> np.uint64(32)
    v = v.astype(np.int64)
    top = (1 << b) - 1
    return np.where(v < top, v + 1, top + 1)


def nonuniform_labels(keys: np.ndarray, xs: np.ndarray, b: int, s: int) -> np.ndarray:
    """L_i(x_i): Pr = 1/s each for labels 1..2^b-1, remainder on 2^b."""
    u = _mix64(np.asarray(keys, dtype=np.uint64) + _GAMMA * (np.asarray(xs, dtype=np.uint64) + _U1))
    return _nonuniform_from_words(u, b, s)


def nonuniform_label_matrix(keys: np.ndarray, d: int, b: int, s: int) -> np.ndarray:
    k = np.asarray(keys, dtype=np.uint64)[:, None]
    xs = np.arange(1, d + 1, dtype=np.uint64)[None, :]
    u = _mix64(k + _GAMMA * (xs + _U1))
    return _nonuniform_from_words(u, b, s)


def match_counts(keys: np.ndarray, wire: np.ndarray, support: np.ndarray, b: int) -> np.ndarray:
    """N_j = #{i : h_i(j) - 1 == wire_i} for each j in ``support``."""
    k = np.asarray(keys, dtype=np.uint64)
    w = np.asarray(wire, dtype=np.int64)
    out = np.empty(len(support), dtype=np.int64)
    for idx, j in enumerate(support):
        # keep the wrapping multiply in Python ints: numpy warns on uint64
        # scalar overflow even though the wrapped value is what we want
        step = np.uint64((0x9E3779B97F4A7C15 * (int(j) + 1)) & 0xFFFFFFFFFFFFFFFF)
        u = _mix64(k + step)
        lab = (u >> np.uint64(64 - b)).astype(np.int64)  # label - 1
        out[idx] = int(np.count_nonzero(lab == w))
    return out


def candidate_violations(
    label_matrix: np.ndarray, wire: np.ndarray, candidates: np.ndarray, chunk: int = 4096
) -> np.ndarray:
    """Per candidate support row: #clients whose message matches no candidate symbol.

    ``candidates`` is (L, s) of 1-indexed symbols; a candidate is consistent
    iff its violation count is 0.
    """
    match = label_matrix == (np.asarray(wire, dtype=np.int64) + 1)[:, None]  # (n, d)
    cands = np.asarray(candidates, dtype=np.int64)
    L = cands.shape[0]
    out = np.empty(L, dtype=np.int64)
    for lo in range(0, L, chunk):
        block = cands[lo : lo + chunk] - 1  # (C, s) column indices
        hit = match[:, block]  # (n, C, s)
        out[lo : lo + chunk] = (~hit.any(axis=2)).sum(axis=0)
    return out
