"""Two-stage protocol: localize the heavy support, then estimate on it.

Clients 1..n1 feed the configured localization scheme; clients n1+1..n feed
the hash estimator, restricted to the localized support.  The harness (not
the clients) computes ground-truth-aware quantities: the target set
J_alpha = {j : p_j >= alpha} and the success flag J_alpha subset-of estimate.

Modes:
  * distributional: p is a known s-sparse distribution, samples drawn i.i.d.;
  * distribution_free: raw samples, a shared random permutation splits them
    into the two stages, and the target is the empirical distribution;
  * almost_sparse: scheme B with the minimum-violation decoder and a larger
    localization stage, error measured against the full (non-sparse) p.
"""

from __future__ import annotations

import enum
import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import group_testing, scheme_a, scheme_b, scheme_d
from .core import (
    ClientSamples,
    SparseDistribution,
    SupportEstimate,
    empirical_dense,
    l1,
    l2_sq,
    sample_clients,
    tv,
)
from .estimation import (
    conditional_l2_bound,
    encode_estimation_stage,
    estimate_frequencies,
    estimation_keys,
)
from .rng import StageTag, derive_stream


class Mode(str, enum.Enum):
    DISTRIBUTIONAL = "distributional"
    DISTRIBUTION_FREE = "distribution_free"
    ALMOST_SPARSE = "almost_sparse"


class Scheme(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


@dataclass(frozen=True)
class SchemeConfig:
    scheme: Scheme
    d: int
    s: int
    b: int
    n: int
    master_seed: int
    mode: Mode = Mode.DISTRIBUTIONAL
    n1_fraction: float = 0.5
    alpha: float | None = None  # None -> 1/sqrt(n 2^b)
    c1: float = 1.0  # almost-sparse n1 constant
    ks_q: int | None = None  # scheme C matrix parameters (None -> chosen from d, s)
    ks_k: int | None = None
    permute: bool = True  # distribution-free debug flag; False is for bias demos only

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "mode", Mode(self.mode))

    @property
    def n1(self) -> int:
        if self.mode is Mode.DISTRIBUTION_FREE:
            return self.n // 2
        if self.mode is Mode.ALMOST_SPARSE:
            want = self.c1 * math.sqrt(self.n * math.log(self.n)) * self.s * math.log(self.d / self.s)
            n1 = int(math.ceil(want))
            if n1 > self.n // 2:
                warnings.warn(
                    f"almost-sparse n1 formula gives {n1} > n/2 = {self.n // 2}; clamping",
                    stacklevel=2,
                )
                n1 = self.n // 2
            return max(1, n1)
        return int(self.n * self.n1_fraction)

    @property
    def n2(self) -> int:
        return self.n - self.n1

    @property
    def alpha_value(self) -> float:
        if self.alpha is not None:
            return self.alpha
        return 1.0 / math.sqrt(self.n * (1 << self.b))


@dataclass(frozen=True)
class TrialRecord:
    config: SchemeConfig
    l2_sq: float
    l1: float
    tv: float
    localization_success: bool
    est_support_size: int
    wall_ms: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("l2_sq", "l1", "tv"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


def validate_config(config: SchemeConfig) -> None:
    """Scheme/parameter compatibility checks; must run before any sampling."""
    if config.d < 1 or config.s < 1 or config.b < 1 or config.n < 2:
        raise ValueError("require d >= 1, s >= 1, b >= 1, n >= 2")
    if config.s > config.d:
        raise ValueError(f"sparsity {config.s} exceeds alphabet size {config.d}")
    if not 1 <= config.n1 <= config.n - 1:
        raise ValueError(f"need 1 <= n1 <= n-1, got n1={config.n1}, n={config.n}")
    if not 0 < config.alpha_value < 1:
        raise ValueError(f"alpha must lie in (0,1), got {config.alpha_value}")
    scheme = config.scheme
    if scheme is Scheme.B:
        if (1 << config.b) - 1 > config.s:
            raise ValueError(f"scheme B needs 2^b - 1 <= s, got b={config.b}, s={config.s}")
        total = math.comb(config.d, config.s)
        if total > scheme_b.ENUMERATION_CAP:
            raise ValueError(
                f"scheme B enumeration C({config.d},{config.s}) = {total} exceeds cap"
            )
    if scheme is Scheme.D:
        if config.d < 2 or config.d & (config.d - 1):
            raise ValueError(f"scheme D needs d a power of two, got d={config.d}")
        if config.n1 < config.d.bit_length() - 1:
            raise ValueError(
                f"scheme D needs n1 >= log2(d) = {config.d.bit_length() - 1}, got {config.n1}"
            )
        if (1 << config.b) - 1 > 2 * config.s:
            raise ValueError(f"scheme D needs 2^b - 1 <= 2s, got b={config.b}, s={config.s}")
    if scheme is Scheme.C:
        matrix_for(config)  # raises on bad (q, k) or d > q^k
    if config.mode is Mode.DISTRIBUTION_FREE:
        if config.n % 2:
            raise ValueError("distribution-free mode needs even n")
        if scheme is Scheme.C:
            raise ValueError(
                "distribution-free mode supports schemes A, B, D only "
                "(the analysis does not cover randomized group testing bins)"
            )
    if config.mode is Mode.ALMOST_SPARSE and scheme is not Scheme.B:
        raise ValueError("almost-sparse mode runs scheme B only")


_MATRIX_CACHE: dict[tuple[int, int], group_testing.MeasurementMatrix] = {}


def matrix_for(config: SchemeConfig) -> group_testing.MeasurementMatrix:
    """The measurement matrix a scheme-C run uses, built once per (q, k)."""
    if config.ks_q is None or config.ks_k is None:
        q, k = group_testing.choose_ks_params(config.d, config.s)
    else:
        q, k = config.ks_q, config.ks_k
    if q**k < config.d:
        raise ValueError(f"matrix covers q^k = {q**k} symbols, below d = {config.d}")
    if (q, k) not in _MATRIX_CACHE:
        _MATRIX_CACHE[(q, k)] = group_testing.build_ks_matrix(q, k)
    return _MATRIX_CACHE[(q, k)]


def _localize(
    config: SchemeConfig, stage1: ClientSamples, randomized_groups: bool
) -> tuple[SupportEstimate, int]:
    """Dispatch stage 1; returns (estimate, messages sent)."""
    seed = config.master_seed
    n1 = stage1.n
    assignment = (
        derive_stream(seed, StageTag.GROUP_ASSIGNMENT) if randomized_groups else None
    )
    if config.scheme is Scheme.A:
        layout = scheme_a.GroupingLayout(config.d, config.b)
        estimate = scheme_a.localize_grouped(stage1, layout, assignment)
        return estimate, n1
    if config.scheme is Scheme.B:
        keys = scheme_b.localization_keys(seed, np.arange(1, n1 + 1))
        log = scheme_b.encode_nonuniform_stage(stage1, keys, config.b, config.s)
        decoder = derive_stream(seed, StageTag.DECODER)
        if config.mode is Mode.ALMOST_SPARSE:
            estimate = scheme_b.decode_almost_sparse(keys, log, config.d, config.s, decoder)
        else:
            estimate = scheme_b.decode_exhaustive(keys, log, config.d, config.s, decoder)
        return estimate, log.n
    if config.scheme is Scheme.C:
        matrix = matrix_for(config)
        log, bins = group_testing.encode_gt_stage(stage1, matrix, config.b)
        z = group_testing.aggregate_or(log, bins, matrix.T)
        estimate = group_testing.cover_decode(z, matrix)
        # the matrix may cover q^k > d columns; out-of-alphabet covered
        # columns are not real symbols
        symbols = tuple(j for j in estimate.symbols if j <= config.d)
        return SupportEstimate(symbols, estimate.meta), log.n
    estimate = scheme_d.run_tree_localization(
        stage1, config.d, config.s, config.b, assignment_stream=assignment
    )
    return estimate, n1


def _estimate_stage2(
    config: SchemeConfig, stage2_values: np.ndarray, support
) -> tuple[np.ndarray, int]:
    # stage-2 channels come from the Estimation tag and global client
    # indices n1+1..n; localization randomness never reaches this stage
    keys = estimation_keys(config.master_seed, np.arange(config.n1 + 1, config.n + 1))
    log = encode_estimation_stage(stage2_values, keys, config.b)
    assert log.n == config.n2
    return estimate_frequencies(log, keys, support, config.d), log.n


def _finish(config, target_dense, estimate_vec, success, symbols, t0, meta) -> TrialRecord:
    # symbol -> estimated frequency for every localized symbol; a symbol
    # absent from the map was never localized, hence estimated as 0
    meta = {**meta, "estimate": {int(j): float(estimate_vec[j - 1]) for j in symbols}}
    return TrialRecord(
        config=config,
        l2_sq=l2_sq(target_dense, estimate_vec),
        l1=l1(target_dense, estimate_vec),
        tv=tv(target_dense, estimate_vec),
        localization_success=bool(success),
        est_support_size=len(symbols),
        wall_ms=(time.perf_counter() - t0) * 1e3,
        meta=meta,
    )


def run_two_stage(config: SchemeConfig, p: SparseDistribution) -> TrialRecord:
    """One distributional-mode trial against a known s-sparse p."""
    t0 = time.perf_counter()
    if config.mode is not Mode.DISTRIBUTIONAL:
        raise ValueError(f"run_two_stage handles distributional mode, config says {config.mode}")
    validate_config(config)
    if p.d != config.d:
        raise ValueError(f"distribution is on [{p.d}], config says [{config.d}]")
    if p.sparsity > config.s:
        raise ValueError(
            f"p has {p.sparsity} support symbols, above the configured s={config.s}; "
            "use almost-sparse mode for non-sparse targets"
        )
    data = sample_clients(p, config.n, derive_stream(config.master_seed, StageTag.DATA))
    stage1 = ClientSamples(config.d, data.values[: config.n1])
    estimate_set, sent1 = _localize(config, stage1, randomized_groups=False)
    estimate_vec, sent2 = _estimate_stage2(config, data.values[config.n1 :], estimate_set.symbols)
    # one b-bit message per client: total communication is exactly n*b bits
    assert sent1 + sent2 == config.n, "communication accounting"
    alpha = config.alpha_value
    j_alpha = [j for j, pj in p.items() if pj >= alpha]
    return _finish(
        config,
        p.dense(),
        estimate_vec,
        estimate_set.contains(j_alpha),
        estimate_set.symbols,
        t0,
        {"j_alpha": tuple(sorted(j_alpha))},
    )


def run_distribution_free(config: SchemeConfig, samples: ClientSamples) -> TrialRecord:
    """One distribution-free trial on raw samples; target = empirical law."""
    t0 = time.perf_counter()
    if config.mode is not Mode.DISTRIBUTION_FREE:
        raise ValueError(f"run_distribution_free needs distribution_free mode, got {config.mode}")
    validate_config(config)
    if samples.d != config.d or samples.n != config.n:
        raise ValueError("samples shape does not match the config")
    if np.unique(samples.values).size > config.s:
        raise ValueError(f"samples touch more than s={config.s} symbols")
    values = samples.values
    if config.permute:
        sigma = derive_stream(config.master_seed, StageTag.PERMUTATION).generator().permutation(
            config.n
        )
        values = values[sigma]
    pi = empirical_dense(samples.values, config.d)
    stage1 = ClientSamples(config.d, values[: config.n1])
    estimate_set, sent1 = _localize(config, stage1, randomized_groups=True)
    estimate_vec, sent2 = _estimate_stage2(config, values[config.n1 :], estimate_set.symbols)
    assert sent1 + sent2 == config.n, "communication accounting"
    alpha = config.alpha_value
    j_alpha = [j + 1 for j in range(config.d) if pi[j] >= alpha]
    return _finish(
        config,
        pi,
        estimate_vec,
        estimate_set.contains(j_alpha),
        estimate_set.symbols,
        t0,
        {"j_alpha": tuple(j_alpha)},
    )


def almost_sparse_target_set(p: SparseDistribution, s: int, alpha: float) -> tuple[int, ...]:
    """J_alpha = {j : p_j >= max(alpha, p_(s))}, truncated to s symbols under
    ties at p_(s) (highest probability first, then lowest index)."""
    probs = p.dense()
    p_s = float(np.sort(probs)[::-1][s - 1]) if s <= p.d else 0.0
    cut = max(alpha, p_s)
    eligible = [j + 1 for j in range(p.d) if probs[j] >= cut]
    if len(eligible) > s:
        eligible.sort(key=lambda j: (-probs[j - 1], j))
        eligible = sorted(eligible[:s])
    return tuple(eligible)


def run_almost_sparse(config: SchemeConfig, p: SparseDistribution) -> TrialRecord:
    """Scheme B against an arbitrary p; error measured against the full p."""
    t0 = time.perf_counter()
    if config.mode is not Mode.ALMOST_SPARSE:
        raise ValueError(f"run_almost_sparse needs almost_sparse mode, got {config.mode}")
    validate_config(config)
    if p.d != config.d:
        raise ValueError(f"distribution is on [{p.d}], config says [{config.d}]")
    data = sample_clients(p, config.n, derive_stream(config.master_seed, StageTag.DATA))
    stage1 = ClientSamples(config.d, data.values[: config.n1])
    estimate_set, sent1 = _localize(config, stage1, randomized_groups=False)
    estimate_vec, sent2 = _estimate_stage2(config, data.values[config.n1 :], estimate_set.symbols)
    assert sent1 + sent2 == config.n, "communication accounting"
    j_alpha = almost_sparse_target_set(p, config.s, config.alpha_value)
    return _finish(
        config,
        p.dense(),
        estimate_vec,
        estimate_set.contains(j_alpha),
        estimate_set.symbols,
        t0,
        {"j_alpha": j_alpha},
    )


def run_trial(config: SchemeConfig, target) -> TrialRecord:
    """Mode dispatch: SparseDistribution for the distributional modes, raw
    ClientSamples for distribution-free."""
    if config.mode is Mode.DISTRIBUTIONAL:
        return run_two_stage(config, target)
    if config.mode is Mode.DISTRIBUTION_FREE:
        return run_distribution_free(config, target)
    return run_almost_sparse(config, target)


def two_stage_error_bound(failure_rate: float, s: int, alpha: float, n2: int, b: int) -> float:
    """E[l2^2] <= 2 Pr{localization fails} + s alpha^2 + s/(n2 2^b) + 1/n2."""
    return 2 * failure_rate + conditional_l2_bound(s, alpha, n2, b)


def known_support_record(config: SchemeConfig, p: SparseDistribution) -> TrialRecord:
    """Baseline: skip localization, hand the true support to the estimator.

    Uses the same stage-2 clients and channels as run_two_stage would, so the
    comparison isolates the localization cost."""
    t0 = time.perf_counter()
    validate_config(config)
    data = sample_clients(p, config.n, derive_stream(config.master_seed, StageTag.DATA))
    estimate_vec, _ = _estimate_stage2(config, data.values[config.n1 :], p.support)
    return _finish(config, p.dense(), estimate_vec, True, p.support, t0, {"baseline": True})
