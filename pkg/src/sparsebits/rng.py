"""Deterministic randomness derivation for protocol simulations.

Every random object in a trial (a client's hash channel, the trial's data
draws, the shared permutation, ...) is addressed by a (master_seed, stage tag,
index) triple and derived by keyed hashing, never by drawing from a shared
sequential stream.  Two consequences the rest of the package relies on:

  * reproducibility is independent of evaluation order, so trials can be
    farmed out to worker processes and still produce identical results;
  * stage-1 and stage-2 randomness cannot alias: the tag is part of the key.

The hash is splitmix64: one additive step plus the standard finalizer.
``sm64(state, j) = mix64(state + GAMMA*(j+1))`` is exactly the splitmix64
output sequence, and mix64 is a bijection on 64-bit words, so distinct
counters under the same state never collide.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
GAMMA = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


class StageTag(enum.IntEnum):
    """Which protocol stage a randomness stream belongs to."""

    LOCALIZATION = 1
    ESTIMATION = 2
    PERMUTATION = 3
    GROUP_ASSIGNMENT = 4
    # Artifact plumbing, not part of the protocol itself: i.i.d. data draws
    # for a trial, and the decoder's tie-breaking randomness.
    DATA = 5
    DECODER = 6


def mix64(z: int) -> int:
    """splitmix64 finalizer (a bijection on 64-bit integers)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def sm64(state: int, counter: int) -> int:
    """counter-th splitmix64 output from ``state`` (counter >= 0)."""
    return mix64((state + GAMMA * (counter + 1)) & MASK64)


def stream_key(master_seed: int, tag: StageTag, index: int) -> int:
    """Key for the stream addressed by (seed, tag, index)."""
    root = sm64(mix64(master_seed), int(tag))
    return sm64(root, index)


def stream_keys(master_seed: int, tag: StageTag, indices: np.ndarray) -> np.ndarray:
    """Vectorized stream_key over an array of indices (returns uint64)."""
    from . import kernels

    root = sm64(mix64(master_seed), int(tag))
    return kernels.sm64_array(root, np.asarray(indices, dtype=np.uint64))


@dataclass(frozen=True)
class Stream:
    """One addressable randomness stream.

    ``value(counter)`` gives lazy per-counter 64-bit words (used for
    per-symbol hash labels); ``generator()`` gives a numpy Generator keyed by
    the stream key for sequential sampling.  The two draw from unrelated
    function families (splitmix64 vs Philox), so mixing uses of the same
    stream for both is safe.
    """

    master_seed: int
    tag: StageTag
    index: int

    @property
    def key(self) -> int:
        return stream_key(self.master_seed, self.tag, self.index)

    def value(self, counter: int) -> int:
        return sm64(self.key, counter)

    def values(self, counters: np.ndarray) -> np.ndarray:
        from . import kernels

        return kernels.sm64_array(self.key, np.asarray(counters, dtype=np.uint64))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.key))


def derive_stream(master_seed: int, tag: StageTag, index: int = 0) -> Stream:
    if not 0 <= master_seed <= MASK64:
        raise ValueError(f"master_seed must be a 64-bit unsigned integer, got {master_seed}")
    if index < 0:
        raise ValueError(f"stream index must be nonnegative, got {index}")
    return Stream(master_seed, tag, index)


_SWEEP_SALT = 0x5157454550  # "SWEEP"


def trial_seed(master_seed: int, cell_index: int, trial_index: int) -> int:
    """Per-trial master seed for sweep cell ``cell_index``, trial ``trial_index``.

    Pure function of the three arguments, so results are identical no matter
    how trials are scheduled across workers.
    """
    s = sm64(mix64(master_seed), _SWEEP_SALT)
    return sm64(sm64(s, cell_index), trial_index)
