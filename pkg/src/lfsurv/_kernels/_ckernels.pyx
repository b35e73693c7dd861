# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled loop versions of the kernels in ``_pykernels``."""
import numpy as np
from libc.math cimport exp, log


cdef Py_ssize_t _count_below(const double[::1] knots, double v) nogil:
    # number of knots strictly below v
    cdef Py_ssize_t lo = 0, hi = knots.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if knots[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


def step_cumulative(x, knots, values, F_knots, F_x):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, ::1] Fk = np.ascontiguousarray(F_knots, dtype=np.float64)
    cdef const double[:, ::1] Fx = np.ascontiguousarray(F_x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = kv.shape[0], d = Fx.shape[1]
    cdef Py_ssize_t i, j, k, c
    prefix_arr = np.zeros((m + 1, d))
    out_arr = np.empty((n, d))
    cdef double[:, ::1] prefix = prefix_arr
    cdef double[:, ::1] out = out_arr
    cdef double prev
    with nogil:
        for c in range(d):
            for k in range(m):
                prev = Fk[k - 1, c] if k > 0 else 0.0
                prefix[k + 1, c] = prefix[k, c] + vv[k] * (Fk[k, c] - prev)
        for i in range(n):
            j = _count_below(kv, xv[i])
            for c in range(d):
                prev = Fk[j - 1, c] if j > 0 else 0.0
                out[i, c] = prefix[j, c] + vv[j] * (Fx[i, c] - prev)
    return out_arr


def event_table(x, delta):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(delta, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i, k = -1
    times = np.empty(n)
    d = np.zeros(n)
    c = np.zeros(n)
    risk = np.empty(n)
    cdef double[::1] tv = times, dd = d, cc = c, rv = risk
    with nogil:
        for i in range(n):
            if k < 0 or xv[i] != tv[k]:
                k += 1
                tv[k] = xv[i]
                rv[k] = n - i
            if dv[i] != 0.0:
                dd[k] += 1.0
            else:
                cc[k] += 1.0
    k += 1
    return times[:k], d[:k], c[:k], risk[:k]


def cox_breslow(x, delta, Z, eta):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(delta, dtype=np.float64)
    cdef const double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64)
    cdef Py_ssize_t n = Zv.shape[0], q = Zv.shape[1]
    cdef Py_ssize_t i, j, a, b, g_start
    score_arr = np.zeros(q)
    info_arr = np.zeros((q, q))
    s1_arr = np.zeros(q)
    s2_arr = np.zeros((q, q))
    e_arr = np.zeros(q)
    cdef double[::1] score = score_arr, s1 = s1_arr, E = e_arr
    cdef double[:, ::1] info = info_arr, s2 = s2_arr
    cdef double s0 = 0.0, w, loglik = 0.0
    with nogil:
        i = n - 1
        while i >= 0:
            # add the whole tie group ending at i to the risk sums
            g_start = i
            while g_start > 0 and xv[g_start - 1] == xv[i]:
                g_start -= 1
            for j in range(g_start, i + 1):
                w = exp(ev[j])
                s0 += w
                for a in range(q):
                    s1[a] += w * Zv[j, a]
                    for b in range(q):
                        s2[a, b] += w * Zv[j, a] * Zv[j, b]
            for a in range(q):
                E[a] = s1[a] / s0
            for j in range(g_start, i + 1):
                if dv[j] != 0.0:
                    loglik += ev[j] - log(s0)
                    for a in range(q):
                        score[a] += Zv[j, a] - E[a]
                        for b in range(q):
                            info[a, b] += s2[a, b] / s0 - E[a] * E[b]
            i = g_start - 1
    return loglik, score_arr, info_arr


def cox_residuals(x, delta, Z, eta):
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[::1] dv = np.ascontiguousarray(delta, dtype=np.float64)
    cdef const double[:, ::1] Zv = np.ascontiguousarray(Z, dtype=np.float64)
    cdef const double[::1] ev = np.ascontiguousarray(eta, dtype=np.float64)
    cdef Py_ssize_t n = Zv.shape[0], q = Zv.shape[1]
    cdef Py_ssize_t i, j, a, g_start, g_end
    gs0_arr = np.empty(n)
    gE_arr = np.empty((n, q))
    s1_arr = np.zeros(q)
    c1_arr = np.zeros(q)
    out_arr = np.empty((n, q))
    cdef double[::1] gs0 = gs0_arr, s1 = s1_arr, C1 = c1_arr
    cdef double[:, ::1] gE = gE_arr, out = out_arr
    cdef double s0 = 0.0, C0 = 0.0, w, nd
    with nogil:
        # backward pass: risk-set sums at each record's tie group
        i = n - 1
        while i >= 0:
            g_start = i
            while g_start > 0 and xv[g_start - 1] == xv[i]:
                g_start -= 1
            for j in range(g_start, i + 1):
                w = exp(ev[j])
                s0 += w
                for a in range(q):
                    s1[a] += w * Zv[j, a]
            for j in range(g_start, i + 1):
                gs0[j] = s0
                for a in range(q):
                    gE[j, a] = s1[a] / s0
            i = g_start - 1
        # forward pass: cumulative Breslow increments
        i = 0
        while i < n:
            g_end = i
            while g_end + 1 < n and xv[g_end + 1] == xv[i]:
                g_end += 1
            nd = 0.0
            for j in range(i, g_end + 1):
                nd += dv[j]
            C0 += nd / gs0[i]
            for a in range(q):
                C1[a] += nd * gE[i, a] / gs0[i]
            for j in range(i, g_end + 1):
                w = exp(ev[j])
                for a in range(q):
                    out[j, a] = (dv[j] * (Zv[j, a] - gE[j, a])
                                 - w * (Zv[j, a] * C0 - C1[a]))
            i = g_end + 1
    return out_arr
