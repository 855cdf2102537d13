# cython: language_level=3
"""Compiled grouped NDCG@k used inside coordinate ascent."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, INFINITY

cnp.import_array()


def grouped_ndcg(const double[::1] inst_scores,
                 const cnp.int64_t[::1] inst_attr,
                 const double[::1] attr_gains,
                 const cnp.int64_t[::1] attr_offsets,
                 const double[::1] ideal_dcg,
                 int k):
    cdef Py_ssize_t n_inst = inst_scores.shape[0]
    cdef Py_ssize_t n_attr = attr_gains.shape[0]
    cdef Py_ssize_t n_q = ideal_dcg.shape[0]
    cdef Py_ssize_t i, q, r, j, lo, hi, best
    cdef double s, best_s, dcg
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.zeros(n_q, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double[::1] attr_score = np.full(n_attr, -INFINITY, dtype=np.float64)
    cdef unsigned char[::1] taken = np.zeros(n_attr, dtype=np.uint8)

    for i in range(n_inst):
        s = inst_scores[i]
        if s > attr_score[inst_attr[i]]:
            attr_score[inst_attr[i]] = s

    for q in range(n_q):
        if ideal_dcg[q] <= 0.0:
            continue
        lo = attr_offsets[q]
        hi = attr_offsets[q + 1]
        dcg = 0.0
        for r in range(k):
            best = -1
            best_s = -INFINITY
            for j in range(lo, hi):
                if taken[j]:
                    continue
                # strict > keeps the lowest slot on ties
                if best < 0 or attr_score[j] > best_s:
                    best = j
                    best_s = attr_score[j]
            if best < 0:
                break
            taken[best] = 1
            dcg += attr_gains[best] / log2(r + 2.0)
        out[q] = dcg / ideal_dcg[q]
    return out_arr
