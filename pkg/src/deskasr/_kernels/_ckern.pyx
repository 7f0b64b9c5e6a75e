# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: conv2d, maxpool, Viterbi DP.

Contracts mirror `_pykern` exactly (shapes, dtypes, tie-breaking); the
backend choice must never change a result beyond float summation order.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"

NEG_INF = float("-inf")


def conv2d_forward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                   double[::1] b, int stride=1):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], wid = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t ho = (h - kh) // stride + 1
    cdef Py_ssize_t wo = (wid - kw) // stride + 1
    out = np.empty((n, ho, wo, f), dtype=np.float64)
    cdef double[:, :, :, ::1] y = out
    cdef Py_ssize_t i, j, k, a, d, ch, m
    cdef double acc
    for m in range(n):
        for i in range(ho):
            for j in range(wo):
                for k in range(f):
                    acc = b[k]
                    for a in range(kh):
                        for d in range(kw):
                            for ch in range(c):
                                acc += x[m, i * stride + a, j * stride + d, ch] * w[k, a, d, ch]
                    y[m, i, j, k] = acc
    return out


def conv2d_backward(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                    double[:, :, :, ::1] gy, int stride=1):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], wid = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t f = w.shape[0], kh = w.shape[1], kw = w.shape[2]
    cdef Py_ssize_t ho = gy.shape[1], wo = gy.shape[2]
    gx_arr = np.zeros((n, h, wid, c), dtype=np.float64)
    gw_arr = np.zeros((f, kh, kw, c), dtype=np.float64)
    gb_arr = np.zeros(f, dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef double[:, :, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t i, j, k, a, d, ch, m
    cdef double g
    for m in range(n):
        for i in range(ho):
            for j in range(wo):
                for k in range(f):
                    g = gy[m, i, j, k]
                    gb[k] += g
                    for a in range(kh):
                        for d in range(kw):
                            for ch in range(c):
                                gw[k, a, d, ch] += g * x[m, i * stride + a, j * stride + d, ch]
                                gx[m, i * stride + a, j * stride + d, ch] += g * w[k, a, d, ch]
    return gx_arr, gw_arr, gb_arr


def maxpool_forward(double[:, :, :, ::1] x, int ph, int pw):
    cdef Py_ssize_t n = x.shape[0], h = x.shape[1], w = x.shape[2], c = x.shape[3]
    cdef Py_ssize_t ho = h // ph, wo = w // pw
    out = np.empty((n, ho, wo, c), dtype=np.float64)
    idx_arr = np.empty((n, ho, wo, c), dtype=np.int64)
    cdef double[:, :, :, ::1] y = out
    cdef long long[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t m, i, j, ch, a, d, r, col
    cdef double best, v
    cdef long long besti
    for m in range(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    best = x[m, i * ph, j * pw, ch]
                    besti = (i * ph) * w + j * pw
                    for a in range(ph):
                        for d in range(pw):
                            r = i * ph + a
                            col = j * pw + d
                            v = x[m, r, col, ch]
                            if v > best:
                                best = v
                                besti = r * w + col
                    y[m, i, j, ch] = best
                    idx[m, i, j, ch] = besti
    return out, idx_arr


def maxpool_backward(double[:, :, :, ::1] gy, long long[:, :, :, ::1] idx,
                     int h, int w):
    cdef Py_ssize_t n = gy.shape[0], ho = gy.shape[1], wo = gy.shape[2], c = gy.shape[3]
    gx_arr = np.zeros((n, h, w, c), dtype=np.float64)
    cdef double[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t m, i, j, ch
    cdef long long flat
    for m in range(n):
        for i in range(ho):
            for j in range(wo):
                for ch in range(c):
                    flat = idx[m, i, j, ch]
                    gx[m, flat // w, flat % w, ch] += gy[m, i, j, ch]
    return gx_arr


def viterbi_forward(double[:, ::1] scores, double[::1] init,
                    int[::1] edges_src, int[::1] edges_dst,
                    double[::1] edges_logp):
    cdef Py_ssize_t t_len = scores.shape[0], s_len = scores.shape[1]
    cdef Py_ssize_t n_edges = edges_src.shape[0]
    delta_arr = np.full((t_len, s_len), NEG_INF)
    back_arr = np.full((t_len, s_len), -1, dtype=np.int32)
    cdef double[:, ::1] delta = delta_arr
    cdef int[:, ::1] backptr = back_arr
    cdef Py_ssize_t t, s, e
    cdef double cand
    for s in range(s_len):
        delta[0, s] = init[s] + scores[0, s]
    for t in range(1, t_len):
        # edges sorted by (dst, src): strict > keeps the lowest src on ties
        for e in range(n_edges):
            cand = delta[t - 1, edges_src[e]] + edges_logp[e]
            if cand > delta[t, edges_dst[e]]:
                delta[t, edges_dst[e]] = cand
                backptr[t, edges_dst[e]] = edges_src[e]
        for s in range(s_len):
            if delta[t, s] != NEG_INF:
                delta[t, s] += scores[t, s]
    return delta_arr, back_arr
