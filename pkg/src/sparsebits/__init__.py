"""Distributed estimation of sparse discrete distributions under b-bit
communication budgets: two-stage localize-then-estimate protocols, four
localization schemes, a group-testing matrix toolkit, and a Monte Carlo
harness for verifying the dimension-free O(s / (n 2^b)) convergence rate.
"""

from .core import (
    ClientSamples,
    MessageLog,
    SparseDistribution,
    SupportEstimate,
    empirical_dense,
    l1,
    l2_sq,
    make_sparse_distribution,
    project_simplex,
    sample_clients,
    tv,
)
from .estimation import (
    UniformHashChannel,
    collision_probability,
    conditional_l2_bound,
    encode_estimation,
    estimate_frequencies,
    estimator_variance_bound,
    estimator_variance_exact,
)
from .group_testing import (
    MeasurementMatrix,
    PrimeField,
    build_ks_matrix,
    certify_disjunctness,
    choose_ks_params,
    cover_decode,
    is_s_disjunct,
    load_matrix,
    rs_codeword,
    save_matrix,
)
from .harness import (
    SweepSpec,
    ThresholdQuery,
    compute_sample_threshold,
    load_sweep_spec,
    run_sweep,
)
from .pipeline import (
    Mode,
    Scheme,
    SchemeConfig,
    TrialRecord,
    known_support_record,
    run_almost_sparse,
    run_distribution_free,
    run_trial,
    run_two_stage,
    two_stage_error_bound,
)
from .rng import StageTag, Stream, derive_stream, trial_seed
from .scheme_a import GroupingLayout, grouping_failure_bound, localize_grouped
from .scheme_b import (
    NonUniformHashChannel,
    decode_almost_sparse,
    decode_exhaustive,
    hashing_failure_bound,
)
from .scheme_d import PrefixSet, run_tree_localization, tree_failure_bound

__version__ = "0.1.0"
