"""Kernel backends: equivalence, label laws, and counting correctness."""

import numpy as np
import pytest

from sparsebits import _kernels_py as pure
from sparsebits import kernels
from sparsebits.rng import StageTag, sm64, stream_keys

try:
    from sparsebits import _kernels_cy as compiled
except ImportError:
    compiled = None


def _random_keys(n, seed=0):
    return stream_keys(seed, StageTag.LOCALIZATION, np.arange(1, n + 1))


# ---------------------------------------------------------------------------
# Backend equivalence (bit-for-bit)


@pytest.mark.skipif(compiled is None, reason="compiled backend not built")
class TestBackendEquivalence:
    def test_backend_names(self):
        assert pure.BACKEND == "python"
        assert compiled.BACKEND == "cython"
        assert kernels.BACKEND in ("python", "cython")

    def test_sm64_array(self):
        counters = np.arange(1000, dtype=np.uint64)
        assert np.array_equal(pure.sm64_array(123, counters), compiled.sm64_array(123, counters))

    @pytest.mark.parametrize("b", [1, 2, 5])
    def test_uniform_labels(self, b):
        keys = _random_keys(2000)
        xs = np.arange(1, 2001, dtype=np.uint64) % 37 + 1
        a = pure.uniform_labels(keys, xs, b)
        c = compiled.uniform_labels(keys, xs, b)
        assert np.array_equal(a, c)
        assert a.min() >= 1 and a.max() <= (1 << b)

    @pytest.mark.parametrize("b", [1, 3])
    def test_uniform_label_matrix(self, b):
        keys = _random_keys(64)
        assert np.array_equal(
            pure.uniform_label_matrix(keys, 25, b), compiled.uniform_label_matrix(keys, 25, b)
        )

    @pytest.mark.parametrize("b,s", [(1, 2), (2, 5), (3, 7)])
    def test_nonuniform_labels(self, b, s):
        keys = _random_keys(2000, seed=9)
        xs = np.arange(1, 2001, dtype=np.uint64) % 29 + 1
        a = pure.nonuniform_labels(keys, xs, b, s)
        c = compiled.nonuniform_labels(keys, xs, b, s)
        assert np.array_equal(a, c)

    @pytest.mark.parametrize("b,s", [(1, 2), (2, 4)])
    def test_nonuniform_label_matrix(self, b, s):
        keys = _random_keys(64, seed=3)
        assert np.array_equal(
            pure.nonuniform_label_matrix(keys, 19, b, s),
            compiled.nonuniform_label_matrix(keys, 19, b, s),
        )

    def test_match_counts(self):
        keys = _random_keys(5000, seed=4)
        b = 2
        xs = (np.arange(5000, dtype=np.uint64) % 11) + 1
        wire = pure.uniform_labels(keys, xs, b) - 1
        support = np.array([1, 4, 11], dtype=np.int64)
        assert np.array_equal(
            pure.match_counts(keys, wire, support, b),
            compiled.match_counts(keys, wire, support, b),
        )

    def test_candidate_violations(self):
        keys = _random_keys(800, seed=5)
        b, s, d = 1, 2, 10
        lab = pure.nonuniform_label_matrix(keys, d, b, s)
        xs = (np.arange(800, dtype=np.uint64) % 2) * 5 + 2  # symbols 2 and 7
        wire = pure.nonuniform_labels(keys, xs, b, s) - 1
        cands = np.array([[2, 7], [1, 2], [3, 9]], dtype=np.int64)
        assert np.array_equal(
            pure.candidate_violations(lab, wire, cands),
            compiled.candidate_violations(lab, wire, cands),
        )


# ---------------------------------------------------------------------------
# Label laws (through the selected backend)


def test_uniform_label_law():
    # Pr{h(x) = y} = 2^-b within 0.005, over 1e5 independent channels
    b = 2
    keys = _random_keys(100_000, seed=21)
    xs = np.full(100_000, 3, dtype=np.uint64)
    labels = kernels.uniform_labels(keys, xs, b)
    for y in range(1, (1 << b) + 1):
        assert abs((labels == y).mean() - 0.25) < 0.005


def test_uniform_labels_depend_on_symbol_and_key():
    keys = _random_keys(1000, seed=2)
    a = kernels.uniform_labels(keys, np.full(1000, 1, dtype=np.uint64), 4)
    b = kernels.uniform_labels(keys, np.full(1000, 2, dtype=np.uint64), 4)
    assert not np.array_equal(a, b)


def test_nonuniform_label_law_s2_b1():
    # label 1 carries probability 1/s = 1/2; frequency within 0.01 at 1e5 draws
    keys = _random_keys(100_000, seed=13)
    xs = np.full(100_000, 1, dtype=np.uint64)
    labels = kernels.nonuniform_labels(keys, xs, 1, 2)
    freq1 = (labels == 1).mean()
    assert 0.49 <= freq1 <= 0.51
    assert set(np.unique(labels)) == {1, 2}


def test_nonuniform_label_law_s4_b2():
    # Pr{L = 2^b} = 1 - (2^b - 1)/s = 1 - 3/4 = 1/4
    keys = _random_keys(100_000, seed=14)
    xs = np.full(100_000, 5, dtype=np.uint64)
    labels = kernels.nonuniform_labels(keys, xs, 2, 4)
    assert abs((labels == 4).mean() - 0.25) < 0.006
    for y in (1, 2, 3):
        assert abs((labels == y).mean() - 0.25) < 0.006


def test_nonuniform_degenerate_s1_b1():
    # Pr{L = 1} = 1/s = 1: every message is 1
    keys = _random_keys(10_000, seed=15)
    labels = kernels.nonuniform_labels(keys, np.full(10_000, 1, dtype=np.uint64), 1, 1)
    assert (labels == 1).all()


def test_label_matrix_agrees_with_pointwise_labels():
    keys = _random_keys(50, seed=16)
    d, b, s = 12, 2, 4
    mat = kernels.nonuniform_label_matrix(keys, d, b, s)
    assert mat.shape == (50, d)
    for x in (1, 7, 12):
        col = kernels.nonuniform_labels(keys, np.full(50, x, dtype=np.uint64), b, s)
        assert np.array_equal(mat[:, x - 1], col)


# ---------------------------------------------------------------------------
# Counting kernels against a transparent reference


def test_match_counts_against_brute_force():
    n2, b, d = 400, 2, 9
    keys = stream_keys(77, StageTag.ESTIMATION, np.arange(1, n2 + 1))
    xs = (np.arange(n2, dtype=np.uint64) % d) + 1
    wire = kernels.uniform_labels(keys, xs, b) - 1
    support = np.array([2, 5, 9], dtype=np.int64)
    counts = kernels.match_counts(keys, wire, support, b)
    for idx, j in enumerate(support):
        expected = sum(
            1
            for i in range(n2)
            if (1 + (sm64(int(keys[i]), int(j)) >> (64 - b))) - 1 == wire[i]
        )
        assert counts[idx] == expected


def test_candidate_violations_against_brute_force():
    n1, b, s, d = 300, 1, 2, 8
    keys = stream_keys(88, StageTag.LOCALIZATION, np.arange(1, n1 + 1))
    xs = (np.arange(n1, dtype=np.uint64) % 2) * 3 + 2  # symbols 2 and 5
    wire = kernels.nonuniform_labels(keys, xs, b, s) - 1
    lab = kernels.nonuniform_label_matrix(keys, d, b, s)
    cands = np.array([[2, 5], [1, 8], [2, 3]], dtype=np.int64)
    viol = kernels.candidate_violations(lab, wire, cands)
    for c_idx, cand in enumerate(cands):
        expected = 0
        for i in range(n1):
            if all(lab[i, j - 1] - 1 != wire[i] for j in cand):
                expected += 1
        assert viol[c_idx] == expected
    # the true support is always consistent with honestly generated messages
    assert viol[0] == 0
