"""Localization scheme C: non-adaptive group testing with disjunct matrices.

A T x d binary measurement matrix M assigns each symbol (column) to a set of
tests (rows).  Clients simulate test outcomes: client i handles test row t(i)
(or a contiguous band of 2^b - 1 rows when b > 1) and reports whether its
sample participates.  OR-aggregation reconstructs the outcome vector
Z = union of columns of the observed defective symbols, and cover decoding
returns every column contained in Z.  If M is s-disjunct and the outcomes are
exact, decoding is zero-error for any defective set of size <= s.

The concrete construction is the Reed-Solomon concatenation: T = q^2, d = q^k
for prime q, column j the one-hot encoding of the degree-(k-1) polynomial
whose coefficients are j's base-q digits, evaluated at all q field points.
Any two such columns agree in at most k - 1 rows, so the matrix is s-disjunct
whenever s(k-1) < q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .core import ClientSamples, MessageLog, SupportEstimate

DISJUNCT_ENUMERATION_CAP = 5_000_000


def is_prime(q: int) -> bool:
    if q < 2:
        return False
    for f in range(2, int(math.isqrt(q)) + 1):
        if q % f == 0:
            return False
    return True


class PrimeField:
    """Arithmetic mod a prime q.  Prime order only: inverses come from
    Fermat's little theorem, which needs the modulus prime."""

    def __init__(self, q: int):
        if not is_prime(q):
            raise ValueError(f"field order must be prime, got {q}")
        self.q = q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("0 has no multiplicative inverse")
        return pow(a, self.q - 2, self.q)

    def pow(self, a: int, e: int) -> int:
        return pow(a, e, self.q)


def rs_codeword(message: Sequence[int], q: int) -> np.ndarray:
    """Evaluations over all q field points of the polynomial with the given
    coefficient vector (message[t] multiplies x^t)."""
    field = PrimeField(q)
    msg = [m % q for m in message]
    out = np.empty(q, dtype=np.int64)
    for x in range(q):
        acc = 0
        for t, m in enumerate(msg):
            acc = field.add(acc, field.mul(m, field.pow(x, t)))
        out[x] = acc
    return out


@dataclass(frozen=True)
class MeasurementMatrix:
    """Binary T x d matrix stored as per-column sorted row supports (1-based)."""

    T: int
    d: int
    column_supports: tuple[tuple[int, ...], ...]
    q: int | None = None
    k: int | None = None

    def __post_init__(self):
        if self.T < 1 or self.d < 1:
            raise ValueError("matrix dimensions must be positive")
        if len(self.column_supports) != self.d:
            raise ValueError(f"expected {self.d} columns, got {len(self.column_supports)}")
        for j, supp in enumerate(self.column_supports, start=1):
            if list(supp) != sorted(set(supp)):
                raise ValueError(f"column {j} support must be sorted and duplicate-free")
            if supp and (supp[0] < 1 or supp[-1] > self.T):
                raise ValueError(f"column {j} has a row index outside [1, {self.T}]")

    @cached_property
    def dense(self) -> np.ndarray:
        out = np.zeros((self.T, self.d), dtype=np.uint8)
        for j, supp in enumerate(self.column_supports):
            for r in supp:
                out[r - 1, j] = 1
        return out

    @cached_property
    def column_masks(self) -> list[int]:
        """Column supports as row bitmasks (bit r-1 set iff row r is a 1)."""
        return [sum(1 << (r - 1) for r in supp) for supp in self.column_supports]

    def blockwise_sparse_width(self, w: int) -> bool:
        """True iff every aligned w-row window of every column holds <= one 1."""
        if w < 1:
            raise ValueError("window width must be >= 1")
        for supp in self.column_supports:
            windows = [(r - 1) // w for r in supp]
            if len(windows) != len(set(windows)):
                return False
        return True

    def max_blockwise_width(self) -> int:
        for w in range(self.T, 0, -1):
            if self.blockwise_sparse_width(w):
                return w
        return 1


def build_ks_matrix(q: int, k: int) -> MeasurementMatrix:
    """Reed-Solomon concatenated matrix: T = q^2, d = q^k.

    Column j encodes the base-q digits of j-1 (little-endian, so digit 0 is
    the constant coefficient); block x in [0..q-1] of the column is the
    one-hot of the codeword symbol at evaluation point x.
    """
    if not is_prime(q):
        raise ValueError(f"q must be prime, got {q}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    d = q**k
    # Vectorized polynomial evaluation: powers[x, t] = x^t mod q.
    xs = np.arange(q, dtype=np.int64)
    powers = np.ones((q, k), dtype=np.int64)
    for t in range(1, k):
        powers[:, t] = (powers[:, t - 1] * xs) % q
    idx = np.arange(d, dtype=np.int64)
    digits = np.empty((d, k), dtype=np.int64)
    rem = idx.copy()
    for t in range(k):
        digits[:, t] = rem % q
        rem //= q
    codewords = (digits @ powers.T) % q  # (d, q): codeword symbol per point
    rows = xs[None, :] * q + codewords + 1  # (d, q), increasing in x
    supports = tuple(tuple(int(r) for r in rows[j]) for j in range(d))
    return MeasurementMatrix(T=q * q, d=d, column_supports=supports, q=q, k=k)


def choose_ks_params(d: int, s_star: int) -> tuple[int, int]:
    """Smallest prime q admitting some k with q^k >= d and s*(k-1) < q,
    with the minimal such k.  k = 1 needs q >= d (disjunctness is then free:
    columns are disjoint)."""
    if d < 1 or s_star < 1:
        raise ValueError("d and s* must be >= 1")
    q = 2
    while True:
        if is_prime(q):
            k = 1
            while q**k < d:
                k += 1
            # minimal k satisfying q^k >= d; check the disjunctness budget
            if k == 1 or s_star * (k - 1) < q:
                return q, k
        q += 1


def default_disjunctness(q: int, k: int) -> int:
    """Largest s with s(k-1) < q (the constructive guarantee); columns of a
    k=1 matrix are pairwise disjoint, making every s < d work."""
    if k == 1:
        return q - 1
    return (q - 1) // (k - 1)


def _covers(mask: int, union: int) -> bool:
    return mask & ~union == 0


def is_s_disjunct(matrix: MeasurementMatrix, s: int, cap: int = DISJUNCT_ENUMERATION_CAP) -> bool:
    """Definition check: no column's support is covered by the union of any s
    other columns' supports.

    Literal subset enumeration with two exactness-preserving prunes:
    columns sharing no row with column j cannot help cover it, and if even
    the s largest overlaps sum below |supp(j)| no s-set can cover (row-count
    argument).  Enumeration only runs where the prunes leave work.
    """
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    if s >= matrix.d:
        return False  # no s distinct other columns exist
    masks = matrix.column_masks
    weights = [len(supp) for supp in matrix.column_supports]
    checked = 0
    for j in range(matrix.d):
        mj = masks[j]
        if mj == 0:
            return False  # empty column is covered by anything
        relevant = [t for t in range(matrix.d) if t != j and masks[t] & mj]
        overlaps = sorted(((masks[t] & mj).bit_count() for t in relevant), reverse=True)
        if sum(overlaps[:s]) < weights[j]:
            continue
        r = min(s, len(relevant))
        for size in range(1, r + 1):
            # a cover by fewer than s columns extends to one by exactly s
            n_subsets = math.comb(len(relevant), size)
            checked += n_subsets
            if checked > cap:
                raise ValueError(
                    f"disjunctness enumeration exceeds cap {cap}; use certify_disjunctness"
                )
            for K in combinations(relevant, size):
                union = 0
                for t in K:
                    union |= masks[t]
                if _covers(mj, union):
                    return False
    return True


def certify_disjunctness(matrix: MeasurementMatrix) -> int:
    """Exact disjunctness level: max s such that the matrix is s-disjunct.

    Per column j, computes the minimum number of other columns needed to
    cover supp(M_j) by dynamic programming over subsets of supp(M_j)
    (|supp| <= q stays small for the constructions used here); the matrix is
    s-disjunct iff every column needs more than s.  Capped at d - 1, the
    largest meaningful s.
    """
    INF = matrix.d + 1
    best_overall = INF
    for j in range(matrix.d):
        supp = matrix.column_supports[j]
        w = len(supp)
        if w == 0:
            return 0
        if w > 24:
            raise ValueError(f"column weight {w} too large for subset DP")
        row_pos = {r: t for t, r in enumerate(supp)}
        # project every other column onto supp(M_j) as a w-bit mask
        proj = set()
        for t in range(matrix.d):
            if t == j:
                continue
            m = 0
            for r in matrix.column_supports[t]:
                if r in row_pos:
                    m |= 1 << row_pos[r]
            if m:
                proj.add(m)
        full = (1 << w) - 1
        cover = [INF] * (full + 1)
        cover[0] = 0
        for state in range(full + 1):
            if cover[state] >= INF:
                continue
            # next uncovered row position
            free = (~state) & full
            if free == 0:
                continue
            pivot = free & (-free)
            for m in proj:
                if m & pivot:
                    nxt = state | m
                    if cover[state] + 1 < cover[nxt]:
                        cover[nxt] = cover[state] + 1
        best_overall = min(best_overall, cover[full])
        if best_overall == 1:
            return 0
    return min(best_overall - 1, matrix.d - 1)


# ---------------------------------------------------------------------------
# Client-side encoding and decoding


def encode_gt_1bit(x: int, i: int, matrix: MeasurementMatrix) -> int:
    """Client i simulates test row ((i-1) mod T) + 1: sends M[t(i), x]."""
    if not 1 <= x <= matrix.d:
        raise ValueError(f"symbol {x} outside [1, {matrix.d}]")
    t = (i - 1) % matrix.T + 1
    return int(matrix.dense[t - 1, x - 1])


def num_bins(T: int, b: int) -> int:
    return math.ceil(T / ((1 << b) - 1))


def _position_table(matrix: MeasurementMatrix, b: int) -> np.ndarray:
    """pos[tau-1, x-1] = 1-based position of the single 1 of column x inside
    bin tau's row band, or 0.  Raises on a blockwise-sparsity violation.
    Memoized per (matrix, b): encoding touches it once per client batch."""
    tables = matrix.__dict__.setdefault("_pos_tables", {})
    if b in tables:
        return tables[b]
    w = (1 << b) - 1
    nb = num_bins(matrix.T, b)
    pos = np.zeros((nb, matrix.d), dtype=np.int64)
    for j, supp in enumerate(matrix.column_supports):
        for r in supp:
            tau = (r - 1) // w
            if pos[tau, j] != 0:
                raise ValueError(
                    f"column {j + 1} has two 1s in row band {tau + 1} at width {w}: "
                    "matrix is not blockwise sparse for this bit budget"
                )
            pos[tau, j] = (r - 1) % w + 1
    tables[b] = pos
    return pos


def encode_gt_bbit(x: int, i: int, matrix: MeasurementMatrix, b: int) -> int:
    """Client i handles a (2^b - 1)-row band and points at its sample's 1
    within the band (0 if none)."""
    if not 1 <= x <= matrix.d:
        raise ValueError(f"symbol {x} outside [1, {matrix.d}]")
    nb = num_bins(matrix.T, b)
    tau = (i - 1) % nb + 1
    pos = _position_table(matrix, b)
    return int(pos[tau - 1, x - 1])


def encode_gt_stage(
    samples: ClientSamples, matrix: MeasurementMatrix, b: int, bins: np.ndarray | None = None
) -> tuple[MessageLog, np.ndarray]:
    """Vectorized b-bit encoding for clients 1..n1; returns (messages, bins).

    ``bins`` overrides the deterministic round-robin bin assignment, e.g. to
    force full per-bin coverage when checking decoder exactness (the
    distribution-free pipeline rejects scheme C, so bins are never random)."""
    nb = num_bins(matrix.T, b)
    if bins is None:
        bins = np.arange(samples.n, dtype=np.int64) % nb + 1
    pos = _position_table(matrix, b)
    messages = pos[bins - 1, samples.values - 1]
    return MessageLog(b, messages), bins


def aggregate_or(messages: MessageLog, bins: np.ndarray, T: int) -> np.ndarray:
    """Reconstruct the outcome vector: row (tau-1)(2^b-1) + y tests positive
    when any client of bin tau reports y > 0."""
    w = (1 << messages.b) - 1
    y = messages.messages
    nz = y > 0
    rows = (bins[nz] - 1) * w + y[nz]
    if rows.size and rows.max() > T:
        raise ValueError("reconstructed row outside [1, T]; corrupt message log")
    z = np.zeros(T, dtype=np.uint8)
    z[rows - 1] = 1
    return z


def cover_decode(outcomes: np.ndarray, matrix: MeasurementMatrix) -> SupportEstimate:
    """All columns whose support lies inside the positive rows.  Takes no
    sparsity argument: the output size adapts to the outcome vector."""
    z = np.asarray(outcomes, dtype=np.uint8)
    if z.shape != (matrix.T,):
        raise ValueError(f"expected length-{matrix.T} outcome vector, got {z.shape}")
    zmask = sum(1 << r for r in range(matrix.T) if z[r])
    symbols = [j + 1 for j, m in enumerate(matrix.column_masks) if _covers(m, zmask)]
    return SupportEstimate(tuple(symbols), {"scheme": "C"})


def exact_outcomes(defectives: Iterable[int], matrix: MeasurementMatrix) -> np.ndarray:
    """Noiseless outcome vector: OR of the defective columns."""
    z = np.zeros(matrix.T, dtype=np.uint8)
    for j in defectives:
        for r in matrix.column_supports[j - 1]:
            z[r - 1] = 1
    return z


def localize_gt(
    samples: ClientSamples, matrix: MeasurementMatrix, b: int
) -> SupportEstimate:
    messages, bins = encode_gt_stage(samples, matrix, b)
    return cover_decode(aggregate_or(messages, bins, matrix.T), matrix)


def gt_failure_bound(n1: int, alpha: float, T: int, s: int, b: int = 1) -> float:
    """Pr{some row of a heavy column has no witnessing client}
    <= exp(-n1 (2^b - 1) alpha / T + ln s + ln T); each of the ~n1(2^b-1)/T
    clients per row sees the row's symbol w.p. >= alpha."""
    return math.exp(-n1 * ((1 << b) - 1) * alpha / T + math.log(s) + math.log(T))


# ---------------------------------------------------------------------------
# Matrix file format
#
#   line 1: "T d" or "T d q k" (provenance of RS-built matrices)
#   line j+1: sorted 1-based row indices of column j, space-separated
#             (empty line = empty column)


def save_matrix(matrix: MeasurementMatrix, path: str) -> None:
    with open(path, "w") as fh:
        head = f"{matrix.T} {matrix.d}"
        if matrix.q is not None and matrix.k is not None:
            head += f" {matrix.q} {matrix.k}"
        fh.write(head + "\n")
        for supp in matrix.column_supports:
            fh.write(" ".join(str(r) for r in supp) + "\n")


def load_matrix(path: str) -> MeasurementMatrix:
    with open(path) as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: empty matrix file")
    head = lines[0].split()
    if len(head) not in (2, 4):
        raise ValueError(f"{path}: header must be 'T d' or 'T d q k', got {lines[0]!r}")
    try:
        nums = [int(v) for v in head]
    except ValueError as exc:
        raise ValueError(f"{path}: non-integer header field: {lines[0]!r}") from exc
    T, d = nums[0], nums[1]
    q, k = (nums[2], nums[3]) if len(nums) == 4 else (None, None)
    if len(lines) - 1 != d:
        raise ValueError(f"{path}: expected {d} column lines, found {len(lines) - 1}")
    supports = []
    for j, line in enumerate(lines[1:], start=1):
        try:
            supp = tuple(int(v) for v in line.split())
        except ValueError as exc:
            raise ValueError(f"{path}: column {j} has a non-integer row index") from exc
        supports.append(supp)
    try:
        return MeasurementMatrix(T=T, d=d, column_supports=tuple(supports), q=q, k=k)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from exc
