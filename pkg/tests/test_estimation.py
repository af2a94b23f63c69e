"""Estimation stage: unbiasedness (exact and Monte Carlo), variance, bounds."""

from fractions import Fraction
from itertools import product
from math import comb

import numpy as np
import pytest

from sparsebits.core import make_sparse_distribution, sample_clients
from sparsebits.estimation import (
    UniformHashChannel,
    collision_probability,
    conditional_l2_bound,
    encode_estimation,
    encode_estimation_stage,
    estimate_frequencies,
    estimation_keys,
    estimator_variance_bound,
    estimator_variance_exact,
)
from sparsebits.core import MessageLog
from sparsebits.rng import StageTag, derive_stream


# ---------------------------------------------------------------------------
# Exact rational oracle (small edition; the acceptance suite runs the full
# d=4, n2 in 1..6 version).  Enumerates every hash table h: [d] -> [2^b] with
# equal probability, computes the exact per-client match probability b_j, and
# checks that the estimator's expectation is exactly p_j.


def exact_match_probability(p: dict[int, Fraction], d: int, b: int, j: int) -> Fraction:
    B = 1 << b
    total = Fraction(0)
    n_tables = B**d
    for table in product(range(1, B + 1), repeat=d):
        for x in range(1, d + 1):
            px = p.get(x, Fraction(0))
            if px and table[j - 1] == table[x - 1]:
                total += px
    return total / n_tables


def exact_estimator_mean(b_j: Fraction, n2: int, b: int) -> Fraction:
    B = 1 << b
    mean = Fraction(0)
    for N in range(n2 + 1):
        pmf = comb(n2, N) * b_j**N * (1 - b_j) ** (n2 - N)
        mean += pmf * (Fraction(N, n2) * B / (B - 1) - Fraction(1, B - 1))
    return mean


def test_rational_oracle_small():
    d, b = 3, 1
    p = {1: Fraction(2, 3), 3: Fraction(1, 3)}
    for j in (1, 3):
        b_j = exact_match_probability(p, d, b, j)
        assert b_j == (p[j] * ((1 << b) - 1) + 1) / (1 << b)
        for n2 in (1, 2, 4):
            assert exact_estimator_mean(b_j, n2, b) == p[j]


def test_rational_oracle_covers_zero_probability_symbols():
    d, b = 3, 1
    p = {2: Fraction(1)}
    b_j = exact_match_probability(p, d, b, 1)  # symbol 1 has probability 0
    assert b_j == Fraction(1, 2)
    assert exact_estimator_mean(b_j, 3, b) == 0


# ---------------------------------------------------------------------------
# Channels


def test_channel_label_range_and_determinism():
    ch = UniformHashChannel(key=123456, b=2, d=8)
    labels = [ch.label(x) for x in range(1, 9)]
    assert all(1 <= v <= 4 for v in labels)
    assert labels == [ch.label(x) for x in range(1, 9)]
    assert np.array_equal(ch.labels(np.arange(1, 9)), np.array(labels))


def test_channel_rejects_out_of_range_symbol():
    ch = UniformHashChannel(key=1, b=1, d=4)
    with pytest.raises(ValueError):
        ch.label(0)
    with pytest.raises(ValueError):
        ch.label(5)


def test_encode_estimation_is_the_hash_value():
    ch = UniformHashChannel(key=99, b=3, d=10)
    assert encode_estimation(7, ch) == ch.label(7)


def test_channel_uniformity_over_fresh_channels():
    # Pr{h(x) = y} = 2^-b +- 0.005 over 1e5 channels
    b, x = 2, 3
    keys = estimation_keys(31337, np.arange(1, 100_001))
    from sparsebits import kernels

    labels = kernels.uniform_labels(keys, np.full(100_000, x, dtype=np.uint64), b)
    for y in range(1, 5):
        assert abs((labels == y).mean() - 0.25) < 0.005


def test_wire_format_is_label_minus_one():
    keys = estimation_keys(7, np.arange(1, 101))
    values = (np.arange(100) % 5) + 1
    log = encode_estimation_stage(values, keys, b=2)
    assert log.b == 2
    assert log.messages.min() >= 0 and log.messages.max() <= 3
    ch0 = UniformHashChannel(key=int(keys[0]), b=2, d=5)
    assert log.messages[0] == ch0.label(int(values[0])) - 1


# ---------------------------------------------------------------------------
# collision_probability / variance formulas


def test_collision_probability_examples():
    assert collision_probability(1.0, 1) == 1.0
    assert collision_probability(1.0, 4) == 1.0
    assert collision_probability(0.0, 2) == 0.25
    assert collision_probability(0.5, 1) == 0.75


def test_collision_probability_monte_carlo():
    # p_j = 0.5, b = 1 -> 0.75, cross-checked over hash and data randomness
    p = make_sparse_distribution(6, [2, 5], [0.5, 0.5])
    n = 200_000
    data = sample_clients(p, n, derive_stream(3, StageTag.DATA))
    keys = estimation_keys(3, np.arange(1, n + 1))
    log = encode_estimation_stage(data.values, keys, b=1)
    from sparsebits import kernels

    counts = kernels.match_counts(keys, log.messages, np.array([2], dtype=np.int64), 1)
    assert abs(counts[0] / n - 0.75) < 0.005


def test_variance_formulas_relationship():
    # exact = bound * (1 - p_j) * 2^b/(2^b - 1): equal at p_j = 1/2^b,
    # below for larger p_j, above for smaller
    for b in (1, 2, 3):
        B = 1 << b
        n2 = 1000
        at = estimator_variance_exact(1 / B, b, n2) / estimator_variance_bound(1 / B, b, n2)
        assert at == pytest.approx(1.0)
        assert estimator_variance_exact(0.9, b, n2) < estimator_variance_bound(0.9, b, n2)
        assert estimator_variance_exact(0.0, b, n2) > estimator_variance_bound(0.0, b, n2)


# ---------------------------------------------------------------------------
# estimate_frequencies mechanics


def test_estimate_inverts_full_match():
    # every client matched (N_j = n2) -> estimate exactly 1
    n2, b, d, j = 50, 1, 6, 4
    keys = estimation_keys(11, np.arange(1, n2 + 1))
    from sparsebits import kernels

    labels_j = kernels.uniform_labels(keys, np.full(n2, j, dtype=np.uint64), b)
    log = MessageLog(b, labels_j - 1)
    est = estimate_frequencies(log, keys, [j], d)
    assert est[j - 1] == pytest.approx(1.0)
    assert (np.delete(est, j - 1) == 0).all()


def test_estimate_half_match_is_noise_floor():
    # N_j = n2/2 at b=1 maps exactly to 0
    d, b, j = 6, 1, 2
    keys = estimation_keys(12, np.arange(1, 3))
    from sparsebits import kernels

    labels_j = kernels.uniform_labels(keys, np.full(2, j, dtype=np.uint64), b)
    wire = np.array([labels_j[0] - 1, 1 - (labels_j[1] - 1)])  # one match, one miss
    est = estimate_frequencies(MessageLog(b, wire), keys, [j], d)
    assert est[j - 1] == pytest.approx(0.0)


def test_estimate_validation_errors():
    keys = estimation_keys(1, np.arange(1, 11))
    log = MessageLog(1, np.zeros(10, dtype=np.int64))
    with pytest.raises(ValueError, match="at least one"):
        estimate_frequencies(MessageLog(1, np.array([], dtype=np.int64)), keys[:0], [1], 4)
    with pytest.raises(ValueError, match="channel keys"):
        estimate_frequencies(log, keys[:5], [1], 4)
    with pytest.raises(ValueError, match="support symbols"):
        estimate_frequencies(log, keys, [0], 4)
    with pytest.raises(ValueError, match="support symbols"):
        estimate_frequencies(log, keys, [5], 4)
    assert estimate_frequencies(log, keys, [], 4).tolist() == [0.0] * 4


def _run_trials(p, support, b, n2, trials, seed0):
    d = p.d
    estimates = np.empty((trials, len(support)))
    cols = np.array(sorted(support)) - 1
    for t in range(trials):
        data = sample_clients(p, n2, derive_stream(seed0 + t, StageTag.DATA))
        keys = estimation_keys(seed0 + t, np.arange(1, n2 + 1))
        log = encode_estimation_stage(data.values, keys, b)
        est = estimate_frequencies(log, keys, support, d)
        estimates[t] = est[cols]
    return estimates


def test_unbiasedness_monte_carlo():
    # z-test at 4 sigma over >= 500 trials, both support symbols
    p = make_sparse_distribution(8, [1, 5], [0.7, 0.3])
    b, n2, trials = 2, 20_000, 500
    estimates = _run_trials(p, [1, 5], b, n2, trials, seed0=40_000)
    for col, pj in ((0, 0.7), (1, 0.3)):
        mean = estimates[:, col].mean()
        stderr = estimates[:, col].std(ddof=1) / np.sqrt(trials)
        assert abs(mean - pj) < 4 * stderr, f"p_j={pj}: mean {mean}, stderr {stderr}"


def test_variance_bound_on_valid_domain():
    # sample variance <= 1.2 * b_j/n2 when every p_j >= 1/2^b
    p = make_sparse_distribution(8, [1, 5], [0.7, 0.3])
    b, n2, trials = 2, 20_000, 500
    estimates = _run_trials(p, [1, 5], b, n2, trials, seed0=50_000)
    for col, pj in ((0, 0.7), (1, 0.3)):
        assert pj >= 1 / (1 << b)  # the domain on which the bound is valid
        sample_var = estimates[:, col].var(ddof=1)
        assert sample_var <= 1.2 * estimator_variance_bound(pj, b, n2)
        exact = estimator_variance_exact(pj, b, n2)
        assert abs(sample_var - exact) < 0.25 * exact


def test_variance_exact_below_threshold_symbol():
    # for p_j < 1/2^b the b_j/n2 bound undershoots the true variance (by up
    # to 2x at b=1); the exact formula still matches the sample variance
    p = make_sparse_distribution(4, [1, 3], [0.99, 0.01])
    b, n2, trials = 1, 5_000, 3_000
    estimates = _run_trials(p, [1, 3], b, n2, trials, seed0=60_000)
    sample_var = estimates[:, 1].var(ddof=1)
    exact = estimator_variance_exact(0.01, b, n2)
    assert abs(sample_var - exact) < 0.15 * exact
    assert sample_var > 1.5 * estimator_variance_bound(0.01, b, n2)


def test_conditional_l2_bound_with_true_support():
    # mean l2^2 <= 1.5 * (s alpha^2 + s/(n2 2^b) + 1/n2) with J_alpha given
    p = make_sparse_distribution(8, [1, 5], [0.7, 0.3])
    s, b, n, trials = 2, 2, 40_000, 400
    n2 = n // 2
    alpha = 1.0 / np.sqrt(n * (1 << b))
    estimates = _run_trials(p, [1, 5], b, n2, trials, seed0=70_000)
    truth = np.array([0.7, 0.3])
    l2_sqs = ((estimates - truth) ** 2).sum(axis=1)
    assert l2_sqs.mean() <= 1.5 * conditional_l2_bound(s, alpha, n2, b)


def test_messages_fit_budget():
    keys = estimation_keys(5, np.arange(1, 1001))
    values = (np.arange(1000) % 7) + 1
    for b in (1, 2, 4):
        log = encode_estimation_stage(values, keys, b)
        assert log.messages.max() < (1 << b)
        assert log.total_bits == 1000 * b
