"""Benchmark the compiled kernels against the pure-numpy fallback.

Both backends are imported directly (ignoring SPARSEBITS_PURE_PY), each
kernel is run on representative workload sizes, and a table of median
runtimes with speedup factors is printed.  Results are also sanity-checked
for bit-identical agreement, so a silent divergence fails loudly here too.

Run:  python3 benchmarks/bench_kernels.py
"""

from __future__ import annotations

import sys
import time

import numpy as np

try:
    from sparsebits import _kernels_cy as cy
except ImportError:
    cy = None
from sparsebits import _kernels_py as py


def median_time(fn, repeats=7):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return sorted(times)[len(times) // 2]


def workloads():
    rng = np.random.default_rng(12345)

    n, d, b, s = 200_000, 64, 2, 4
    keys = rng.integers(1, 2**63, size=n, dtype=np.uint64)
    xs = rng.integers(1, d + 1, size=n).astype(np.uint64)
    counters = np.arange(n, dtype=np.uint64)
    yield ("sm64_array", f"n={n}", lambda k: k.sm64_array(7, counters))
    yield ("uniform_labels", f"n={n} b={b}", lambda k: k.uniform_labels(keys, xs, b))

    nm, dm = 20_000, 64
    keys_m = keys[:nm]
    yield (
        "uniform_label_matrix",
        f"n={nm} d={dm} b={b}",
        lambda k: k.uniform_label_matrix(keys_m, dm, b),
    )
    yield (
        "nonuniform_labels",
        f"n={n} b={b} s={s}",
        lambda k: k.nonuniform_labels(keys, xs, b, s),
    )
    yield (
        "nonuniform_label_matrix",
        f"n={nm} d={dm} b={b} s={s}",
        lambda k: k.nonuniform_label_matrix(keys_m, dm, b, s),
    )

    wire = py.uniform_labels(keys, xs, b) - 1
    support = np.arange(1, 17, dtype=np.int64)
    yield (
        "match_counts",
        f"n={n} |support|=16",
        lambda k: k.match_counts(keys, wire, support, b),
    )

    nv, dv, sv = 4_000, 40, 2
    keys_v = keys[:nv]
    labels = py.nonuniform_label_matrix(keys_v, dv, b, sv)
    wire_v = py.nonuniform_labels(keys_v, xs[:nv] % dv + 1, b, sv) - 1
    cands = np.array(
        [(i, j) for i in range(1, dv + 1) for j in range(i + 1, dv + 1)], dtype=np.int64
    )
    yield (
        "candidate_violations",
        f"n={nv} cands={len(cands)}",
        lambda k: k.candidate_violations(labels, wire_v, cands),
    )


def main() -> int:
    if cy is None:
        print("compiled backend not importable; nothing to compare", file=sys.stderr)
        return 1
    rows = []
    for name, size, call in workloads():
        out_py = call(py)
        out_cy = call(cy)
        if not np.array_equal(np.asarray(out_py), np.asarray(out_cy)):
            print(f"MISMATCH in {name} ({size})", file=sys.stderr)
            return 1
        t_py = median_time(lambda: call(py))
        t_cy = median_time(lambda: call(cy))
        rows.append((name, size, t_py * 1e3, t_cy * 1e3, t_py / t_cy))

    w = max(len(r[0]) for r in rows)
    ws = max(len(r[1]) for r in rows)
    print(f"{'kernel':<{w}}  {'workload':<{ws}}  {'pure (ms)':>10}  {'compiled (ms)':>13}  {'speedup':>7}")
    for name, size, tp, tc, sp in rows:
        print(f"{name:<{w}}  {size:<{ws}}  {tp:>10.3f}  {tc:>13.3f}  {sp:>6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
