# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Bit-identical twin of `_kernels_py` (same integer arithmetic, fused loops).
Any change here must be mirrored there; tests/test_kernels.py enforces
equality on random inputs.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

cdef extern from *:
    """
    #include <stdint.h>
    static inline uint64_t sb_mix64(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
    #if defined(_MSC_VER)
    #include <intrin.h>
    static inline uint64_t sb_popcount(uint64_t x) { return __popcnt64(x); }
    #else
    static inline uint64_t sb_popcount(uint64_t x) { return __builtin_popcountll(x); }
    #endif
    """
    cnp.uint64_t sb_mix64(cnp.uint64_t z) nogil
    cnp.uint64_t sb_popcount(cnp.uint64_t x) nogil

cdef cnp.uint64_t GAMMA = 0x9E3779B97F4A7C15UL


def sm64_array(state, counters):
    cdef cnp.uint64_t[::1] c = np.ascontiguousarray(counters, dtype=np.uint64)
    cdef Py_ssize_t n = c.shape[0], i
    cdef cnp.uint64_t st = <cnp.uint64_t> state
    out = np.empty(n, dtype=np.uint64)
    cdef cnp.uint64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = sb_mix64(st + GAMMA * (c[i] + 1))
    return out


def uniform_labels(keys, xs, int b):
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef cnp.uint64_t[::1] x = np.ascontiguousarray(xs, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], i
    cdef int shift = 64 - b
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = <cnp.int64_t> (sb_mix64(k[i] + GAMMA * (x[i] + 1)) >> shift) + 1
    return out


def uniform_label_matrix(keys, int d, int b):
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], i, j
    cdef int shift = 64 - b
    out = np.empty((n, d), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(d):
                o[i, j] = <cnp.int64_t> (sb_mix64(k[i] + GAMMA * (<cnp.uint64_t> j + 2)) >> shift) + 1
    return out


cdef inline cnp.int64_t nonuniform_from_word(cnp.uint64_t u, cnp.int64_t top, cnp.uint64_t s) nogil:
    cdef cnp.int64_t v = <cnp.int64_t> (((u >> 32) * s) >> 32)
    return v + 1 if v < top else top + 1


def nonuniform_labels(keys, xs, int b, int s):
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef cnp.uint64_t[::1] x = np.ascontiguousarray(xs, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], i
    cdef cnp.int64_t top = (1 << b) - 1
    cdef cnp.uint64_t su = <cnp.uint64_t> s
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = nonuniform_from_word(sb_mix64(k[i] + GAMMA * (x[i] + 1)), top, su)
    return out


def nonuniform_label_matrix(keys, int d, int b, int s):
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], i, j
    cdef cnp.int64_t top = (1 << b) - 1
    cdef cnp.uint64_t su = <cnp.uint64_t> s
    out = np.empty((n, d), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(d):
                o[i, j] = nonuniform_from_word(sb_mix64(k[i] + GAMMA * (<cnp.uint64_t> j + 2)), top, su)
    return out


def match_counts(keys, wire, support, int b):
    cdef cnp.uint64_t[::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef cnp.int64_t[::1] w = np.ascontiguousarray(wire, dtype=np.int64)
    cdef cnp.uint64_t[::1] sup = np.ascontiguousarray(support, dtype=np.uint64)
    cdef Py_ssize_t n = k.shape[0], m = sup.shape[0], i, t
    cdef int shift = 64 - b
    cdef cnp.int64_t cnt
    cdef cnp.uint64_t j
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for t in range(m):
            j = sup[t]
            cnt = 0
            for i in range(n):
                if <cnp.int64_t> (sb_mix64(k[i] + GAMMA * (j + 1)) >> shift) == w[i]:
                    cnt += 1
            o[t] = cnt
    return out


def candidate_violations(label_matrix, wire, candidates, chunk=4096):
    # chunk is accepted for interface parity with the numpy backend; the
    # packed representation needs no chunking.  Client matches are packed
    # into per-column bitmasks once (O(n d)), so each candidate costs only
    # s * n/64 word ORs plus popcounts.
    cdef cnp.int64_t[:, ::1] lab = np.ascontiguousarray(label_matrix, dtype=np.int64)
    cdef cnp.int64_t[::1] w = np.ascontiguousarray(wire, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] cand = np.ascontiguousarray(candidates, dtype=np.int64)
    cdef Py_ssize_t n = lab.shape[0], d = lab.shape[1], L = cand.shape[0], s = cand.shape[1]
    cdef Py_ssize_t W = (n + 63) >> 6
    packed_arr = np.zeros((d, W if W > 0 else 1), dtype=np.uint64)
    cdef cnp.uint64_t[:, ::1] packed = packed_arr
    cdef Py_ssize_t ell, i, j, t, wd
    cdef cnp.int64_t target, matched
    cdef cnp.uint64_t acc, bit
    out = np.empty(L, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    with nogil:
        for i in range(n):
            target = w[i] + 1
            bit = (<cnp.uint64_t> 1) << (i & 63)
            wd = i >> 6
            for j in range(d):
                if lab[i, j] == target:
                    packed[j, wd] |= bit
        for ell in range(L):
            matched = 0
            for wd in range(W):
                acc = 0
                for t in range(s):
                    acc |= packed[cand[ell, t] - 1, wd]
                matched += <cnp.int64_t> sb_popcount(acc)
            o[ell] = n - matched
    return out
