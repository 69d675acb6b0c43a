"""Pure-Python/numpy versions of the compiled kernels, same signatures and results."""

import math

import numpy as np

TIE_EPS = 1e-12
TAU = 1e-12


def impurity(criterion, c1, n):
    if n <= 0:
        return 0.0
    p = c1 / n
    if criterion == 0:
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    h = 0.0
    if p > 0.0:
        h -= p * math.log2(p)
    if q > 0.0:
        h -= q * math.log2(q)
    return h


def _impurity_vec(criterion, c1, n):
    p = c1 / n
    if criterion == 0:
        return 2.0 * p * (1.0 - p)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        hp = np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
        hq = np.where(q > 0.0, q * np.log2(np.where(q > 0.0, q, 1.0)), 0.0)
    return (0.0 - hp) - hq


def best_split(X, y, rows, features, criterion, min_leaf):
    n = rows.shape[0]
    if n < 2:
        return None
    yn = y[rows]
    c1 = int(yn.sum())
    if c1 == 0 or c1 == n:
        return None
    parent = impurity(criterion, c1, n)
    best = None
    best_dec = -math.inf
    nl = np.arange(1, n, dtype=np.int64)
    nr = n - nl
    size_ok = (nl >= min_leaf) & (nr >= min_leaf)
    for f in features:
        v = X[rows, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        cl1 = np.cumsum(yn[order])[:-1]
        ok = size_ok & (vs[:-1] < vs[1:])
        if not ok.any():
            continue
        idx = np.flatnonzero(ok)
        l_c, l_n, r_n = cl1[idx], nl[idx], nr[idx]
        dec = (parent
               - (l_n / n) * _impurity_vec(criterion, l_c, l_n)
               - (r_n / n) * _impurity_vec(criterion, c1 - l_c, r_n))
        for pos in range(idx.size):
            d = float(dec[pos])
            if d > best_dec + TIE_EPS:
                a = float(vs[idx[pos]])
                b = float(vs[idx[pos] + 1])
                thr = (a + b) / 2.0
                if thr >= b:
                    thr = a
                best_dec = d
                best = (int(f), thr, d)
    return best


def smo_solve(Q, y, C, tol, max_iter):
    n = Q.shape[0]
    alpha = np.zeros(n)
    G = np.full(n, -1.0)
    pos = y > 0
    neg = ~pos
    it = 0
    converged = False
    while True:
        v = -y * G
        up = (pos & (alpha < C)) | (neg & (alpha > 0))
        low = (pos & (alpha > 0)) | (neg & (alpha < C))
        if not up.any() or not low.any():
            converged = True
            break
        vu = np.where(up, v, -np.inf)
        vl = np.where(low, v, np.inf)
        i = int(np.argmax(vu))
        j = int(np.argmin(vl))
        if vu[i] - vl[j] < tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1
        old_i, old_j = alpha[i], alpha[j]
        ai, aj = old_i, old_j
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = TAU
            delta = (-G[i] - G[j]) / quad
            diff = ai - aj
            ai += delta
            aj += delta
            if diff > 0:
                if aj < 0:
                    aj, ai = 0.0, diff
            elif ai < 0:
                ai, aj = 0.0, -diff
            if diff > 0:
                if ai > C:
                    ai, aj = C, C - diff
            elif aj > C:
                aj, ai = C, C + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            if quad <= 0.0:
                quad = TAU
            delta = (G[i] - G[j]) / quad
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        alpha[i], alpha[j] = ai, aj
        G += Q[i] * (ai - old_i) + Q[j] * (aj - old_j)

    yg = y * G
    at_ub = alpha >= C
    at_lb = alpha <= 0
    free = ~at_ub & ~at_lb
    if free.any():
        sum_free = 0.0
        for value in yg[free]:
            sum_free += float(value)
        rho = sum_free / int(free.sum())
    else:
        ub_set = (at_ub & neg) | (at_lb & pos)
        lb_set = (at_ub & pos) | (at_lb & neg)
        ub = float(yg[ub_set].min()) if ub_set.any() else math.inf
        lb = float(yg[lb_set].max()) if lb_set.any() else -math.inf
        rho = (ub + lb) / 2.0
    return alpha, -rho, it, converged


def tree_apply(X, feature, threshold, left, right):
    node = np.zeros(X.shape[0], dtype=np.int64)
    rows = np.arange(X.shape[0])
    active = left[node] >= 0
    while active.any():
        r = rows[active]
        cur = node[r]
        go_left = X[r, feature[cur]] <= threshold[cur]
        node[r] = np.where(go_left, left[cur], right[cur])
        active = left[node] >= 0
    return node
