"""Sweep driver, CSV emission, config parsing, and the sample-size calculator.

A sweep is a Cartesian product of (scheme, n, d, s, b) cells, each run for a
fixed number of trials.  Every trial's seed is a pure function of
(master_seed, cell index, trial index), and rows are buffered and written in
(cell, trial) order, so output is identical no matter how many worker
processes execute the trials (SPARSEBITS_WORKERS, default 1).

Per-trial wall time is inherently nondeterministic; specs that need
byte-identical re-runs set timing: "none", which writes 0 in the wall_ms
column instead of the measurement.
"""

from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import SparseDistribution, make_sparse_distribution, sample_clients
from .pipeline import Mode, Scheme, SchemeConfig, run_trial, validate_config
from .rng import StageTag, derive_stream, trial_seed

CSV_COLUMNS = (
    "scheme",
    "mode",
    "n",
    "d",
    "s",
    "b",
    "trial",
    "seed",
    "l2_sq",
    "l1",
    "tv",
    "loc_success",
    "est_support_size",
    "wall_ms",
)

AGGREGATE_COLUMNS = (
    "scheme",
    "mode",
    "n",
    "d",
    "s",
    "b",
    "trials",
    "l2_sq_mean",
    "l2_sq_stderr",
    "l1_mean",
    "l1_stderr",
    "fail_rate",
    "fail_rate_stderr",
)

SCHEMA_VERSION = 1

_REQUIRED_KEYS = {"schema_version", "schemes", "n", "d", "s", "b", "trials", "mode", "master_seed", "output"}
_OPTIONAL_KEYS = {"timing", "alpha", "n1_fraction", "c1", "target", "ks"}


@dataclass(frozen=True)
class ThresholdQuery:
    """Inputs to the sample-size calculator: the guarantee needs f1 >= 300."""

    f1: float
    f2: float

    def __post_init__(self):
        if self.f1 <= 0 or self.f2 < 0:
            raise ValueError("need f1 > 0 and f2 >= 0")

    @property
    def guaranteed(self) -> bool:
        return self.f1 >= 300


def compute_sample_threshold(query: ThresholdQuery) -> int:
    """Smallest prescribed n = ceil(4 f1^2 max(f2^2, 16 ln^2 f1)); at this n
    (and f1 >= 300), exp(-sqrt(n)/f1 + f2) <= 1/n."""
    return math.ceil(4 * query.f1**2 * max(query.f2**2, 16 * math.log(query.f1) ** 2))


@dataclass(frozen=True)
class SweepSpec:
    schemes: tuple[str, ...]
    n: tuple[int, ...]
    d: tuple[int, ...]
    s: tuple[int, ...]
    b: tuple[int, ...]
    trials: int
    mode: str
    master_seed: int
    output: str
    timing: str = "measured"  # "measured" | "none"
    alpha: float | None = None
    n1_fraction: float = 0.5
    c1: float = 1.0
    target: object = "uniform_spread"  # or "uniform_head" or {"support":[..],"probs":[..]}
    ks: tuple[int, int] | None = None

    def __post_init__(self):
        for name in ("schemes", "n", "d", "s", "b"):
            if not getattr(self, name):
                raise ValueError(f"sweep spec field {name!r} must be a non-empty list")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.timing not in ("measured", "none"):
            raise ValueError(f"timing must be 'measured' or 'none', got {self.timing!r}")
        Mode(self.mode)  # raises on unknown mode
        for sch in self.schemes:
            Scheme(sch)


def parse_sweep_spec(raw: dict) -> SweepSpec:
    """Strict parse: versioned schema, unknown keys are errors."""
    if not isinstance(raw, dict):
        raise ValueError("sweep spec must be a JSON object")
    keys = set(raw)
    unknown = keys - _REQUIRED_KEYS - _OPTIONAL_KEYS
    if unknown:
        raise ValueError(f"unknown sweep spec keys: {sorted(unknown)}")
    missing = _REQUIRED_KEYS - keys
    if missing:
        raise ValueError(f"missing sweep spec keys: {sorted(missing)}")
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported schema_version {raw['schema_version']!r}; this build reads {SCHEMA_VERSION}"
        )
    ks = raw.get("ks")
    if ks is not None:
        if not isinstance(ks, dict) or set(ks) != {"q", "k"}:
            raise ValueError('ks must be an object {"q": ..., "k": ...}')
        ks = (int(ks["q"]), int(ks["k"]))
    return SweepSpec(
        schemes=tuple(raw["schemes"]),
        n=tuple(int(v) for v in raw["n"]),
        d=tuple(int(v) for v in raw["d"]),
        s=tuple(int(v) for v in raw["s"]),
        b=tuple(int(v) for v in raw["b"]),
        trials=int(raw["trials"]),
        mode=str(raw["mode"]),
        master_seed=int(raw["master_seed"]),
        output=str(raw["output"]),
        timing=str(raw.get("timing", "measured")),
        alpha=raw.get("alpha"),
        n1_fraction=float(raw.get("n1_fraction", 0.5)),
        c1=float(raw.get("c1", 1.0)),
        target=raw.get("target", "uniform_spread"),
        ks=ks,
    )


def load_sweep_spec(path: str) -> SweepSpec:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON: {exc}") from exc
    return parse_sweep_spec(raw)


def canonical_target(d: int, s: int, target_spec) -> SparseDistribution:
    """The distribution a sweep cell runs against.

    "uniform_spread" places s equal masses evenly across [1..d] (the default;
    exercises all grouping blocks), "uniform_head" uses {1..s}; an explicit
    {"support": [...], "probs": [...]} pins the target exactly.
    """
    if target_spec == "uniform_spread":
        support = [1 + (i * d) // s for i in range(s)]
        return make_sparse_distribution(d, support, [1.0 / s] * s)
    if target_spec == "uniform_head":
        return make_sparse_distribution(d, list(range(1, s + 1)), [1.0 / s] * s)
    if isinstance(target_spec, dict) and set(target_spec) == {"support", "probs"}:
        return make_sparse_distribution(d, target_spec["support"], target_spec["probs"])
    raise ValueError(f"unrecognized target spec: {target_spec!r}")


def _cell_configs(spec: SweepSpec):
    """(cell_index, scheme, n, d, s, b) in deterministic order."""
    for idx, (sch, n, d, s, b) in enumerate(product(spec.schemes, spec.n, spec.d, spec.s, spec.b)):
        yield idx, sch, n, d, s, b


def _make_config(spec: SweepSpec, sch: str, n: int, d: int, s: int, b: int, seed: int) -> SchemeConfig:
    return SchemeConfig(
        scheme=Scheme(sch),
        d=d,
        s=s,
        b=b,
        n=n,
        master_seed=seed,
        mode=Mode(spec.mode),
        n1_fraction=spec.n1_fraction,
        alpha=spec.alpha,
        c1=spec.c1,
        ks_q=spec.ks[0] if spec.ks else None,
        ks_k=spec.ks[1] if spec.ks else None,
    )


def _run_one(args) -> tuple[int, int, dict]:
    """Worker entry: run one (cell, trial) and return the CSV row fields."""
    spec, cell_idx, sch, n, d, s, b, trial_idx = args
    seed = trial_seed(spec.master_seed, cell_idx, trial_idx)
    config = _make_config(spec, sch, n, d, s, b, seed)
    p = canonical_target(d, s, spec.target)
    if config.mode is Mode.DISTRIBUTION_FREE:
        target = sample_clients(p, n, derive_stream(seed, StageTag.DATA))
    else:
        target = p
    rec = run_trial(config, target)
    row = {
        "scheme": sch,
        "mode": spec.mode,
        "n": n,
        "d": d,
        "s": s,
        "b": b,
        "trial": trial_idx,
        "seed": seed,
        "l2_sq": rec.l2_sq,
        "l1": rec.l1,
        "tv": rec.tv,
        "loc_success": int(rec.localization_success),
        "est_support_size": rec.est_support_size,
        "wall_ms": 0.0 if spec.timing == "none" else rec.wall_ms,
    }
    return cell_idx, trial_idx, row


def _format_row(row: dict) -> str:
    vals = []
    for col in CSV_COLUMNS:
        v = row[col]
        if col == "wall_ms":
            vals.append("0" if v == 0 else f"{v:.3f}")
        elif isinstance(v, float):
            vals.append(repr(v))
        else:
            vals.append(str(v))
    return ",".join(vals)


@dataclass
class SweepResult:
    output: str
    aggregate_output: str
    cells_run: int = 0
    cells_skipped: int = 0
    errors: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.cells_skipped == 0 and not self.errors

    @property
    def exit_code(self) -> int:
        return 0 if self.ok else 1


def aggregate_path(output: str) -> str:
    root, ext = os.path.splitext(output)
    return f"{root}.agg{ext or '.csv'}"


def _aggregate(rows: list[dict]) -> dict:
    l2 = np.array([r["l2_sq"] for r in rows])
    l1v = np.array([r["l1"] for r in rows])
    fails = np.array([1 - r["loc_success"] for r in rows], dtype=float)
    t = len(rows)

    def stderr(x):
        return float(x.std(ddof=1) / math.sqrt(t)) if t > 1 else 0.0

    first = rows[0]
    return {
        "scheme": first["scheme"],
        "mode": first["mode"],
        "n": first["n"],
        "d": first["d"],
        "s": first["s"],
        "b": first["b"],
        "trials": t,
        "l2_sq_mean": float(l2.mean()),
        "l2_sq_stderr": stderr(l2),
        "l1_mean": float(l1v.mean()),
        "l1_stderr": stderr(l1v),
        "fail_rate": float(fails.mean()),
        "fail_rate_stderr": stderr(fails),
    }


def run_sweep(spec: SweepSpec) -> SweepResult:
    """Run all cells, write the per-trial CSV and the per-cell aggregate CSV.

    Invalid cells (configuration rejected) are reported and skipped; the
    result carries a nonzero exit code in that case.
    """
    result = SweepResult(output=spec.output, aggregate_output=aggregate_path(spec.output))
    tasks = []
    cell_meta = {}
    for idx, sch, n, d, s, b in _cell_configs(spec):
        try:
            cfg = _make_config(spec, sch, n, d, s, b, seed=0)
            validate_config(cfg)
            canonical_target(d, s, spec.target)
        except ValueError as exc:
            result.cells_skipped += 1
            result.errors.append(f"cell {idx} (scheme={sch} n={n} d={d} s={s} b={b}): {exc}")
            continue
        cell_meta[idx] = (sch, n, d, s, b)
        for trial_idx in range(spec.trials):
            tasks.append((spec, idx, sch, n, d, s, b, trial_idx))

    workers = int(os.environ.get("SPARSEBITS_WORKERS", "1"))
    rows: dict[tuple[int, int], dict] = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for cell_idx, trial_idx, row in pool.map(_run_one, tasks, chunksize=16):
                rows[(cell_idx, trial_idx)] = row
    else:
        for task in tasks:
            cell_idx, trial_idx, row = _run_one(task)
            rows[(cell_idx, trial_idx)] = row

    with open(spec.output, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for key in sorted(rows):
            fh.write(_format_row(rows[key]) + "\n")

    with open(result.aggregate_output, "w") as fh:
        fh.write(",".join(AGGREGATE_COLUMNS) + "\n")
        for idx in sorted(cell_meta):
            cell_rows = [rows[(idx, t)] for t in range(spec.trials)]
            agg = _aggregate(cell_rows)
            fh.write(",".join(repr(agg[c]) if isinstance(agg[c], float) else str(agg[c]) for c in AGGREGATE_COLUMNS) + "\n")

    result.cells_run = len(cell_meta)
    return result


def print_sweep_summary(result: SweepResult, file=None) -> None:
    file = file or sys.stdout
    print(f"sweep: {result.cells_run} cells written to {result.output}", file=file)
    print(f"aggregates: {result.aggregate_output}", file=file)
    for err in result.errors:
        print(f"skipped: {err}", file=file)
