# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: dense matmul, corpus MaxSim scoring, token logits.

The numpy fallback in fgr._kernels_py implements the same signatures; both
are interchangeable up to floating-point rounding. Scores and logits are
accumulated in float64 regardless of the embedding dtype so that rankings
are stable across kernel implementations.
"""

cimport cython

import numpy as _np

ctypedef fused floating:
    float
    double


cpdef void matmul(floating[:, ::1] a, floating[:, ::1] b, floating[:, ::1] out) noexcept:
    """out[i, j] = sum_k a[i, k] * b[k, j]; out must be zero-initialized."""
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t p = b.shape[1]
    cdef Py_ssize_t i, j, k
    cdef floating aik
    for i in range(n):
        for k in range(m):
            aik = a[i, k]
            for j in range(p):
                out[i, j] += aik * b[k, j]


cdef inline double _dot_f64(const float* a, const float* b, Py_ssize_t h) noexcept nogil:
    """float64 dot of two float32 rows, 8-way unrolled.

    The association order is fixed (strided partial sums combined pairwise),
    so results are deterministic without fast-math reassociation, while the
    independent accumulators let the compiler emit packed FMAs.
    """
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0
    cdef Py_ssize_t c = 0
    cdef Py_ssize_t h8 = h - (h & 7)
    while c < h8:
        s0 += (<double> a[c]) * (<double> b[c])
        s1 += (<double> a[c + 1]) * (<double> b[c + 1])
        s2 += (<double> a[c + 2]) * (<double> b[c + 2])
        s3 += (<double> a[c + 3]) * (<double> b[c + 3])
        s4 += (<double> a[c + 4]) * (<double> b[c + 4])
        s5 += (<double> a[c + 5]) * (<double> b[c + 5])
        s6 += (<double> a[c + 6]) * (<double> b[c + 6])
        s7 += (<double> a[c + 7]) * (<double> b[c + 7])
        c += 8
    while c < h:
        s0 += (<double> a[c]) * (<double> b[c])
        c += 1
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))


cdef inline double _dot_dd(const double* a, const double* b, Py_ssize_t h) noexcept nogil:
    """float64 dot of two float64 rows, same association order as _dot_f64."""
    cdef double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0
    cdef double s4 = 0.0, s5 = 0.0, s6 = 0.0, s7 = 0.0
    cdef Py_ssize_t c = 0
    cdef Py_ssize_t h8 = h - (h & 7)
    while c < h8:
        s0 += a[c] * b[c]
        s1 += a[c + 1] * b[c + 1]
        s2 += a[c + 2] * b[c + 2]
        s3 += a[c + 3] * b[c + 3]
        s4 += a[c + 4] * b[c + 4]
        s5 += a[c + 5] * b[c + 5]
        s6 += a[c + 6] * b[c + 6]
        s7 += a[c + 7] * b[c + 7]
        c += 8
    while c < h:
        s0 += a[c] * b[c]
        c += 1
    return ((s0 + s1) + (s2 + s3)) + ((s4 + s5) + (s6 + s7))


cpdef void maxsim_scores(float[:, ::1] q, float[:, ::1] corpus,
                         long long[::1] bounds, double[::1] out) noexcept:
    """MaxSim score of q against each passage slice of the packed corpus.

    bounds has m+1 entries; passage d owns corpus rows bounds[d]:bounds[d+1].
    Dot products accumulate in float64; the per-query-token max keeps the
    lowest row index on exact ties (strict > comparison).
    """
    cdef Py_ssize_t m = bounds.shape[0] - 1
    cdef Py_ssize_t nq = q.shape[0]
    cdef Py_ssize_t h = q.shape[1]
    cdef Py_ssize_t d, i, r, c, lo, hi
    cdef double acc, total
    cdef const float* qp = &q[0, 0]
    cdef const float* cp = &corpus[0, 0]
    cdef const float* row
    # query converted to float64 once; each corpus row converted once per pass
    qbuf_arr = _np.ascontiguousarray(q, dtype=_np.float64)
    best_arr = _np.empty(nq, dtype=_np.float64)
    rowbuf_arr = _np.empty(h, dtype=_np.float64)
    cdef double[:, ::1] qbuf = qbuf_arr
    cdef double[::1] best = best_arr
    cdef double[::1] rowbuf = rowbuf_arr
    with nogil:
        for d in range(m):
            lo = <Py_ssize_t> bounds[d]
            hi = <Py_ssize_t> bounds[d + 1]
            for i in range(nq):
                best[i] = -1e300
            for r in range(lo, hi):
                row = cp + r * h
                for c in range(h):
                    rowbuf[c] = <double> row[c]
                for i in range(nq):
                    acc = _dot_dd(&qbuf[i, 0], &rowbuf[0], h)
                    if acc > best[i]:
                        best[i] = acc
            total = 0.0
            for i in range(nq):
                total += best[i]
            out[d] = total


cpdef void token_logits(float[:, ::1] q, float[:, ::1] d,
                        double[::1] out_logits, int[::1] out_arg) noexcept:
    """Per document token: max dot product over query tokens, plus argmax.

    Ties keep the lowest query-token index.
    """
    cdef Py_ssize_t nq = q.shape[0]
    cdef Py_ssize_t nd = d.shape[0]
    cdef Py_ssize_t h = q.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc, best
    cdef int arg
    cdef const float* qp = &q[0, 0]
    cdef const float* dp = &d[0, 0]
    for j in range(nd):
        best = -1e300
        arg = 0
        for i in range(nq):
            acc = _dot_f64(qp + i * h, dp + j * h, h)
            if acc > best:
                best = acc
                arg = <int> i
        out_logits[j] = best
        out_arg[j] = arg
