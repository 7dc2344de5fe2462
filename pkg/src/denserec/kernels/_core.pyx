# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
# distutils: language = c++
"""Compiled inner loops: embedding scatter-add and exact top-k selection."""
import numpy as np

cimport numpy as cnp
from cython cimport floating
from libc.math cimport sqrt
from libcpp.algorithm cimport nth_element, sort
from libcpp.vector cimport vector

cnp.import_array()


def scatter_add_rows(floating[:, ::1] out, const cnp.int64_t[::1] indices,
                     const floating[:, ::1] rows):
    cdef Py_ssize_t m = indices.shape[0]
    cdef Py_ssize_t d = out.shape[1]
    cdef Py_ssize_t n = out.shape[0]
    cdef Py_ssize_t i, j, r
    if rows.shape[0] != m or rows.shape[1] != d:
        raise ValueError("rows must be (len(indices), out.shape[1])")
    for i in range(m):
        r = indices[i]
        if r < 0 or r >= n:
            raise IndexError(f"row index {r} outside table of {n} rows")
    with nogil:
        for i in range(m):
            r = indices[i]
            for j in range(d):
                out[r, j] += rows[i, j]


cdef struct Entry:
    double score
    Py_ssize_t index


cdef bint _better(const Entry& a, const Entry& b) noexcept nogil:
    # higher score first, equal scores by ascending index
    return a.score > b.score or (a.score == b.score and a.index < b.index)


cdef double _kth_largest(vector[double]& neg, Py_ssize_t count, Py_ssize_t k) noexcept nogil:
    # neg holds negated scores; selection on the default order is the fast path
    nth_element(neg.begin(), neg.begin() + (k - 1), neg.begin() + count)
    return -neg[k - 1]


def topk_rows(const floating[:, ::1] scores, Py_ssize_t k):
    cdef Py_ssize_t n_rows = scores.shape[0]
    cdef Py_ssize_t n = scores.shape[1]
    if k < 1 or k > n:
        raise ValueError(f"k={k} outside [1, {n}]")
    out_arr = np.empty((n_rows, k), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    # the k-th best of a strided sample of m >= k scores bounds the true k-th
    # best from below, so one pass keeps only about k * n / m candidates
    cdef Py_ssize_t m = min(n, max(k, <Py_ssize_t>(2 * sqrt(<double>k * n))))
    cdef Py_ssize_t stride = n // m
    cdef vector[double] neg
    cdef vector[Entry] cand
    cdef Py_ssize_t r, j, c, above, taken
    cdef double bound, kth, s
    with nogil:
        neg.resize(n)
        cand.resize(n)
        for r in range(n_rows):
            for j in range(m):
                neg[j] = -scores[r, j * stride]
            bound = _kth_largest(neg, m, k)
            c = 0
            for j in range(n):
                s = scores[r, j]
                if s >= bound:
                    cand[c].score = s
                    cand[c].index = j
                    c += 1
            for j in range(c):
                neg[j] = -cand[j].score
            kth = _kth_largest(neg, c, k)
            # candidates are in index order: keep all above the k-th score,
            # then fill with ties by ascending index
            above = 0
            for j in range(c):
                if cand[j].score > kth:
                    cand[above] = cand[j]
                    above += 1
            taken = above
            j = 0
            while taken < k:
                if scores[r, j] == kth:
                    cand[taken].score = kth
                    cand[taken].index = j
                    taken += 1
                j += 1
            sort(cand.begin(), cand.begin() + above, _better)
            for j in range(k):
                out[r, j] = cand[j].index
    return out_arr
