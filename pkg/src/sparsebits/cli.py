"""Command-line interface.

Subcommands:
  simulate   run one configuration for a number of trials, print a summary
  sweep      run a sweep spec file (JSON), write per-trial + aggregate CSVs
  matrix     build or load a measurement matrix, report its properties
  threshold  sample-size calculator for the localization failure guarantee

Worker count for sweeps comes from SPARSEBITS_WORKERS (default 1); results
are identical for any value.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import group_testing
from .core import make_sparse_distribution, sample_clients
from .harness import (
    SweepSpec,
    ThresholdQuery,
    compute_sample_threshold,
    canonical_target,
    load_sweep_spec,
    print_sweep_summary,
    run_sweep,
)
from .pipeline import Mode, Scheme, SchemeConfig, run_trial
from .rng import StageTag, derive_stream, trial_seed


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run one (scheme, n, d, s, b) cell")
    p.add_argument("--scheme", required=True, choices=[s.value for s in Scheme])
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", default=Mode.DISTRIBUTIONAL.value, choices=[m.value for m in Mode])
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n1-fraction", type=float, default=0.5)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--ks-q", type=int, default=None)
    p.add_argument("--ks-k", type=int, default=None)
    p.add_argument("--support", type=int, nargs="+", default=None, help="target support symbols")
    p.add_argument("--probs", type=float, nargs="+", default=None, help="target probabilities")


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="run a sweep spec file")
    p.add_argument("spec", help="path to a JSON sweep spec (schema_version 1)")


def _add_matrix(sub):
    p = sub.add_parser("matrix", help="build or inspect a measurement matrix")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--q", type=int, help="field order (prime); requires --k")
    src.add_argument("--load", help="matrix file to load")
    p.add_argument("--k", type=int, default=None, help="code dimension")
    p.add_argument("--out", default=None, help="write the matrix file here")


def _add_threshold(sub):
    p = sub.add_parser("threshold", help="sample-size calculator")
    p.add_argument("--f1", type=float, required=True)
    p.add_argument("--f2", type=float, required=True)


def _cmd_simulate(args) -> int:
    if (args.support is None) != (args.probs is None):
        print("error: --support and --probs must be given together", file=sys.stderr)
        return 1
    records = []
    for t in range(args.trials):
        seed = trial_seed(args.seed, 0, t)
        config = SchemeConfig(
            scheme=Scheme(args.scheme),
            d=args.d,
            s=args.s,
            b=args.b,
            n=args.n,
            master_seed=seed,
            mode=Mode(args.mode),
            n1_fraction=args.n1_fraction,
            alpha=args.alpha,
            c1=args.c1,
            ks_q=args.ks_q,
            ks_k=args.ks_k,
        )
        if args.support is not None:
            p = make_sparse_distribution(args.d, args.support, args.probs)
        else:
            p = canonical_target(args.d, args.s, "uniform_spread")
        if config.mode is Mode.DISTRIBUTION_FREE:
            target = sample_clients(p, args.n, derive_stream(seed, StageTag.DATA))
        else:
            target = p
        rec = run_trial(config, target)
        records.append(rec)
        print(
            f"trial {t}: l2_sq={rec.l2_sq:.6g} l1={rec.l1:.6g} tv={rec.tv:.6g} "
            f"loc_success={int(rec.localization_success)} |support|={rec.est_support_size}"
        )
    l2s = np.array([r.l2_sq for r in records])
    fails = np.array([not r.localization_success for r in records])
    print(
        f"mean l2_sq={l2s.mean():.6g}  (stderr {l2s.std(ddof=1) / np.sqrt(len(l2s)):.2g})"
        if len(l2s) > 1
        else f"mean l2_sq={l2s.mean():.6g}"
    )
    print(f"failure rate={fails.mean():.4g}")
    return 0


def _cmd_sweep(args) -> int:
    try:
        spec = load_sweep_spec(args.spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    result = run_sweep(spec)
    print_sweep_summary(result)
    return result.exit_code


def _cmd_matrix(args) -> int:
    try:
        if args.load is not None:
            matrix = group_testing.load_matrix(args.load)
        else:
            if args.k is None:
                print("error: --q requires --k", file=sys.stderr)
                return 1
            matrix = group_testing.build_ks_matrix(args.q, args.k)
        level = group_testing.certify_disjunctness(matrix)
        width = matrix.max_blockwise_width()
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    provenance = f" q={matrix.q} k={matrix.k}" if matrix.q is not None else ""
    print(f"T={matrix.T} d={matrix.d}{provenance} block_width={width} disjunct={level}")
    if args.out:
        group_testing.save_matrix(matrix, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_threshold(args) -> int:
    try:
        query = ThresholdQuery(args.f1, args.f2)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    n = compute_sample_threshold(query)
    flag = "guaranteed" if query.guaranteed else "no guarantee (f1 < 300)"
    print(f"n={n} [{flag}]")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sparsebits", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_sweep(sub)
    _add_matrix(sub)
    _add_threshold(sub)
    args = parser.parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "sweep": _cmd_sweep,
        "matrix": _cmd_matrix,
        "threshold": _cmd_threshold,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
