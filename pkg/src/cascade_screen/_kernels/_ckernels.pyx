# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: split search, SMO dual solver, tree traversal.

Must stay numerically identical to ``_pykernels``; both evaluate the same
floating-point expressions in the same order.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log2, INFINITY
from libc.stdlib cimport malloc, free, qsort

cnp.import_array()

ctypedef cnp.int64_t i64

cdef double TIE_EPS = 1e-12
cdef double TAU = 1e-12

ctypedef struct Pair:
    double v
    i64 y


cdef int _cmp_pair(const void *a, const void *b) noexcept nogil:
    cdef double va = (<const Pair *> a).v
    cdef double vb = (<const Pair *> b).v
    if va < vb:
        return -1
    if va > vb:
        return 1
    return 0


cdef inline double _impurity(int criterion, i64 c1, i64 n) noexcept nogil:
    cdef double p, q, h
    if n <= 0:
        return 0.0
    p = <double> c1 / <double> n
    if criterion == 0:
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    h = 0.0
    if p > 0.0:
        h -= p * log2(p)
    if q > 0.0:
        h -= q * log2(q)
    return h


def impurity(int criterion, i64 c1, i64 n):
    return _impurity(criterion, c1, n)


def best_split(const double[:, ::1] X, const i64[::1] y, const i64[::1] rows,
               const i64[::1] features, int criterion, i64 min_leaf):
    """Best (feature, threshold, decrease) over ``features`` for the node ``rows``.

    ``features`` must be sorted ascending. Returns ``None`` if the node is
    pure or no split leaves both children with >= ``min_leaf`` rows.
    """
    cdef Py_ssize_t n = rows.shape[0]
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t i, fi
    cdef i64 c1 = 0, cl1, nl, nr, f
    cdef i64 best_f = -1
    cdef double best_thr = 0.0, best_dec = -INFINITY
    cdef double parent, dec, thr, a, b
    cdef Pair *buf
    if n < 2:
        return None
    for i in range(n):
        c1 += y[rows[i]]
    if c1 == 0 or c1 == n:
        return None
    parent = _impurity(criterion, c1, n)
    buf = <Pair *> malloc(n * sizeof(Pair))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for fi in range(nf):
                f = features[fi]
                for i in range(n):
                    buf[i].v = X[rows[i], f]
                    buf[i].y = y[rows[i]]
                qsort(buf, n, sizeof(Pair), _cmp_pair)
                cl1 = 0
                for i in range(n - 1):
                    cl1 += buf[i].y
                    a = buf[i].v
                    b = buf[i + 1].v
                    if not (a < b):
                        continue
                    nl = i + 1
                    nr = n - nl
                    if nl < min_leaf or nr < min_leaf:
                        continue
                    dec = (parent
                           - (<double> nl / <double> n) * _impurity(criterion, cl1, nl)
                           - (<double> nr / <double> n) * _impurity(criterion, c1 - cl1, nr))
                    if dec > best_dec + TIE_EPS:
                        thr = (a + b) / 2.0
                        if thr >= b:
                            thr = a
                        best_dec = dec
                        best_thr = thr
                        best_f = f
    finally:
        free(buf)
    if best_f < 0:
        return None
    return int(best_f), float(best_thr), float(best_dec)


def smo_solve(const double[:, ::1] Q, const double[::1] y, double C,
              double tol, i64 max_iter):
    """Maximal-violating-pair SMO for ``min 1/2 a'Qa - e'a``, ``0<=a<=C``, ``y'a=0``.

    ``Q[i, j] = y_i y_j K(x_i, x_j)``. Returns ``(alpha, b, n_iter, converged)``
    with decision function ``sum_i alpha_i y_i K(x_i, x) + b``.
    """
    cdef Py_ssize_t n = Q.shape[0]
    cdef Py_ssize_t t, i, j
    cdef i64 it = 0
    cdef bint converged = False
    cdef double gmax, gmin, v, quad, delta, diff, total, old_i, old_j, dai, daj
    cdef double ub, lb, sum_free, yg, rho
    cdef i64 nr_free
    alpha_arr = np.zeros(n, dtype=np.float64)
    grad_arr = np.full(n, -1.0, dtype=np.float64)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = grad_arr
    with nogil:
        while True:
            gmax = -INFINITY
            gmin = INFINITY
            i = -1
            j = -1
            for t in range(n):
                v = -y[t] * G[t]
                if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                    if v > gmax:
                        gmax = v
                        i = t
                if (y[t] > 0 and alpha[t] > 0) or (y[t] < 0 and alpha[t] < C):
                    if v < gmin:
                        gmin = v
                        j = t
            if i < 0 or j < 0 or gmax - gmin < tol:
                converged = True
                break
            if it >= max_iter:
                break
            it += 1
            old_i = alpha[i]
            old_j = alpha[j]
            if y[i] != y[j]:
                quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
                if quad <= 0.0:
                    quad = TAU
                delta = (-G[i] - G[j]) / quad
                diff = alpha[i] - alpha[j]
                alpha[i] += delta
                alpha[j] += delta
                if diff > 0:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = diff
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0.0
                        alpha[j] = -diff
                if diff > 0:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = C - diff
                else:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = C + diff
            else:
                quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
                if quad <= 0.0:
                    quad = TAU
                delta = (G[i] - G[j]) / quad
                total = alpha[i] + alpha[j]
                alpha[i] -= delta
                alpha[j] += delta
                if total > C:
                    if alpha[i] > C:
                        alpha[i] = C
                        alpha[j] = total - C
                else:
                    if alpha[j] < 0:
                        alpha[j] = 0.0
                        alpha[i] = total
                if total > C:
                    if alpha[j] > C:
                        alpha[j] = C
                        alpha[i] = total - C
                else:
                    if alpha[i] < 0:
                        alpha[i] = 0.0
                        alpha[j] = total
            dai = alpha[i] - old_i
            daj = alpha[j] - old_j
            for t in range(n):
                G[t] += Q[i, t] * dai + Q[j, t] * daj

        ub = INFINITY
        lb = -INFINITY
        sum_free = 0.0
        nr_free = 0
        for t in range(n):
            yg = y[t] * G[t]
            if alpha[t] >= C:
                if y[t] < 0:
                    if yg < ub:
                        ub = yg
                else:
                    if yg > lb:
                        lb = yg
            elif alpha[t] <= 0:
                if y[t] > 0:
                    if yg < ub:
                        ub = yg
                else:
                    if yg > lb:
                        lb = yg
            else:
                nr_free += 1
                sum_free += yg
        if nr_free > 0:
            rho = sum_free / nr_free
        else:
            rho = (ub + lb) / 2.0
    return alpha_arr, -rho, int(it), bool(converged)


def tree_apply(const double[:, ::1] X, const i64[::1] feature, const double[::1] threshold,
               const i64[::1] left, const i64[::1] right):
    """Leaf index reached by each row of ``X``."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t r
    cdef i64 node
    out_arr = np.empty(n, dtype=np.int64)
    cdef i64[::1] out = out_arr
    with nogil:
        for r in range(n):
            node = 0
            while left[node] >= 0:
                if X[r, feature[node]] <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[r] = node
    return out_arr
