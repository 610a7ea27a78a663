# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels.

Semantics match _npkernels exactly: same tie rules, same accumulation order
for contributing pairs (lexicographic by (i, j)), conservative broad-phase
pruning with an epsilon margin.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, floor, ceil

cnp.import_array()

ctypedef cnp.int64_t i64

DEF PRUNE_EPS = 1e-9


def hpwl_grad(coords, net_ptr, pin_owner, pin_off, bint want_grad=True):
    cdef const double[:, ::1] C = coords
    cdef const i64[::1] ptr = net_ptr
    cdef const i64[::1] owner = pin_owner
    cdef const double[:, ::1] off = pin_off
    cdef Py_ssize_t k = ptr.shape[0] - 1
    cdef Py_ssize_t n = C.shape[0]

    net_hpwl = np.zeros(k)
    grad_arr = np.zeros((n, 2))
    cdef double[::1] nh = net_hpwl
    cdef double[:, ::1] G = grad_arr

    cdef Py_ssize_t net, t, s, e
    cdef i64 o
    cdef double px, py, xmax, xmin, ymax, ymin
    cdef Py_ssize_t ixmax, ixmin, iymax, iymin

    for net in range(k):
        s = ptr[net]
        e = ptr[net + 1]
        if e <= s:
            continue
        o = owner[s]
        px = C[o, 0] + off[s, 0]
        py = C[o, 1] + off[s, 1]
        xmax = xmin = px
        ymax = ymin = py
        ixmax = ixmin = iymax = iymin = s
        for t in range(s + 1, e):
            o = owner[t]
            px = C[o, 0] + off[t, 0]
            py = C[o, 1] + off[t, 1]
            if px > xmax:
                xmax = px
                ixmax = t
            if px < xmin:
                xmin = px
                ixmin = t
            if py > ymax:
                ymax = py
                iymax = t
            if py < ymin:
                ymin = py
                iymin = t
        nh[net] = (xmax - xmin) + (ymax - ymin)
        if want_grad:
            G[owner[ixmax], 0] += 1.0
            G[owner[ixmin], 0] -= 1.0
            G[owner[iymax], 1] += 1.0
            G[owner[iymin], 1] -= 1.0
    return net_hpwl, (grad_arr if want_grad else None)


cdef inline void _pair_accum(const double[:, ::1] C, const double[:, ::1] S,
                             Py_ssize_t i, Py_ssize_t j,
                             double* val, i64* cnt, double[:, ::1] G) noexcept nogil:
    cdef double gx = fabs(C[i, 0] - C[j, 0]) - (S[i, 0] + S[j, 0]) * 0.5
    cdef double gy = fabs(C[i, 1] - C[j, 1]) - (S[i, 1] + S[j, 1]) * 0.5
    cdef double d = gx if gx >= gy else gy
    cdef double coef, sgn
    if d < 0.0:
        val[0] += d * d
        cnt[0] += 1
        coef = 2.0 * d
        if gx >= gy:
            sgn = 0.0 if C[i, 0] == C[j, 0] else (1.0 if C[i, 0] > C[j, 0] else -1.0)
            G[i, 0] += coef * sgn
            G[j, 0] -= coef * sgn
        else:
            sgn = 0.0 if C[i, 1] == C[j, 1] else (1.0 if C[i, 1] > C[j, 1] else -1.0)
            G[i, 1] += coef * sgn
            G[j, 1] -= coef * sgn


def pair_potential(coords, sizes, group_ptr, bint broadphase=True):
    cdef const double[:, ::1] C = coords
    cdef const double[:, ::1] S = sizes
    cdef const i64[::1] ptr = group_ptr
    cdef Py_ssize_t ngroups = ptr.shape[0] - 1
    cdef Py_ssize_t n = C.shape[0]

    value = np.zeros(ngroups)
    count = np.zeros(ngroups, dtype=np.int64)
    grad_arr = np.zeros((n, 2))
    cdef double[::1] V = value
    cdef i64[::1] CT = count
    cdef double[:, ::1] G = grad_arr

    cdef Py_ssize_t g, s, e, m, i, j, t, a, b, u
    cdef double acc
    cdef i64 cnt
    cdef const i64[::1] order_v
    cdef i64[::1] ci, cj
    cdef Py_ssize_t ncand

    for g in range(ngroups):
        s = ptr[g]
        e = ptr[g + 1]
        m = e - s
        if m < 2:
            continue
        acc = 0.0
        cnt = 0
        if broadphase and m >= 64:
            lo = coords[s:e, 0] - 0.5 * sizes[s:e, 0]
            hi = coords[s:e, 0] + 0.5 * sizes[s:e, 0]
            order = np.argsort(lo, kind="stable")
            lo_sorted = lo[order]
            ends = np.searchsorted(lo_sorted, hi[order] + PRUNE_EPS, side="right")
            counts = np.maximum(ends - np.arange(1, m + 1), 0)
            total = int(counts.sum())
            if total == 0:
                continue
            cand_i = np.empty(total, dtype=np.int64)
            cand_j = np.empty(total, dtype=np.int64)
            order_v = np.ascontiguousarray(order, dtype=np.int64)
            ci = cand_i
            cj = cand_j
            ends_v = np.ascontiguousarray(ends, dtype=np.int64)
            u = 0
            _fill_candidates(order_v, ends_v, ci, cj)
            keep = np.lexsort((cand_j, cand_i))
            ci = np.ascontiguousarray(cand_i[keep])
            cj = np.ascontiguousarray(cand_j[keep])
            ncand = ci.shape[0]
            with nogil:
                for t in range(ncand):
                    _pair_accum(C, S, s + ci[t], s + cj[t], &acc, &cnt, G)
        else:
            with nogil:
                for i in range(s, e):
                    for j in range(i + 1, e):
                        _pair_accum(C, S, i, j, &acc, &cnt, G)
        V[g] = acc
        CT[g] = cnt
    return value, grad_arr, count


cdef void _fill_candidates(const i64[::1] order, const i64[::1] ends,
                           i64[::1] ci, i64[::1] cj) noexcept nogil:
    # pairs (t, u) in sorted-by-lo order with u in (t, ends[t]); mapped back to
    # original indices, normalized so ci < cj
    cdef Py_ssize_t m = order.shape[0]
    cdef Py_ssize_t t, u, w
    cdef i64 a, b
    w = 0
    for t in range(m):
        for u in range(t + 1, ends[t]):
            a = order[t]
            b = order[u]
            if a < b:
                ci[w] = a
                cj[w] = b
            else:
                ci[w] = b
                cj[w] = a
            w += 1


def union_area(lox, loy, hix, hiy):
    keep = (hix > lox) & (hiy > loy)
    lox = np.ascontiguousarray(lox[keep])
    loy = np.ascontiguousarray(loy[keep])
    hix = np.ascontiguousarray(hix[keep])
    hiy = np.ascontiguousarray(hiy[keep])
    cdef Py_ssize_t m = lox.shape[0]
    if m == 0:
        return 0.0
    xs = np.unique(np.concatenate([lox, hix]))
    order = np.ascontiguousarray(np.argsort(loy, kind="stable"), dtype=np.int64)

    cdef const double[::1] LX = lox
    cdef const double[::1] LY = loy
    cdef const double[::1] HX = hix
    cdef const double[::1] HY = hiy
    cdef const double[::1] X = xs
    cdef const i64[::1] O = order
    cdef Py_ssize_t nx = X.shape[0]
    cdef Py_ssize_t sl, t, r
    cdef double x0, x1, covered, running, lo, hi, contrib, total
    total = 0.0
    with nogil:
        for sl in range(nx - 1):
            x0 = X[sl]
            x1 = X[sl + 1]
            covered = 0.0
            running = -1e300
            for t in range(m):
                r = O[t]
                if LX[r] <= x0 and HX[r] >= x1:
                    lo = LY[r]
                    hi = HY[r]
                    if lo < running:
                        lo = running
                    contrib = hi - lo
                    if contrib > 0.0:
                        covered += contrib
                    if HY[r] > running:
                        running = HY[r]
            total += covered * (x1 - x0)
    return float(total)


def rudy_fill(lox, loy, hix, hiy, weights, Py_ssize_t grid_n):
    cdef const double[::1] LX = np.ascontiguousarray(lox)
    cdef const double[::1] LY = np.ascontiguousarray(loy)
    cdef const double[::1] HX = np.ascontiguousarray(hix)
    cdef const double[::1] HY = np.ascontiguousarray(hiy)
    cdef const double[::1] W = np.ascontiguousarray(weights)
    grid = np.zeros((grid_n, grid_n))
    cdef double[:, ::1] Gr = grid
    cdef double pitch = 2.0 / grid_n
    cdef Py_ssize_t nb = LX.shape[0]
    cdef Py_ssize_t b, i, j, i0, i1, j0, j1
    cdef double e0, e1, ox, oy, w
    with nogil:
        for b in range(nb):
            i0 = <Py_ssize_t>floor((LX[b] + 1.0) / pitch)
            i1 = <Py_ssize_t>ceil((HX[b] + 1.0) / pitch) - 1
            j0 = <Py_ssize_t>floor((LY[b] + 1.0) / pitch)
            j1 = <Py_ssize_t>ceil((HY[b] + 1.0) / pitch) - 1
            if i0 < 0:
                i0 = 0
            if i0 > grid_n - 1:
                i0 = grid_n - 1
            if i1 < 0:
                i1 = 0
            if i1 > grid_n - 1:
                i1 = grid_n - 1
            if j0 < 0:
                j0 = 0
            if j0 > grid_n - 1:
                j0 = grid_n - 1
            if j1 < 0:
                j1 = 0
            if j1 > grid_n - 1:
                j1 = grid_n - 1
            w = W[b]
            for i in range(i0, i1 + 1):
                e0 = -1.0 + pitch * i
                e1 = -1.0 + pitch * (i + 1)
                ox = (HX[b] if HX[b] < e1 else e1) - (LX[b] if LX[b] > e0 else e0)
                if ox < 0.0:
                    ox = 0.0
                for j in range(j0, j1 + 1):
                    e0 = -1.0 + pitch * j
                    e1 = -1.0 + pitch * (j + 1)
                    oy = (HY[b] if HY[b] < e1 else e1) - (LY[b] if LY[b] > e0 else e0)
                    if oy < 0.0:
                        oy = 0.0
                    Gr[i, j] += w * ox * oy / (pitch * pitch)
    return grid


def segment_sum(values, seg, Py_ssize_t n):
    cdef const double[:, ::1] V = values
    cdef const i64[::1] S = seg
    cdef Py_ssize_t e = V.shape[0]
    cdef Py_ssize_t d = V.shape[1]
    out = np.zeros((n, d))
    cdef double[:, ::1] O = out
    cdef Py_ssize_t t, c
    cdef i64 s_
    with nogil:
        for t in range(e):
            s_ = S[t]
            for c in range(d):
                O[s_, c] += V[t, c]
    return out


def segment_max(values, seg, Py_ssize_t n):
    cdef const double[:, ::1] V = values
    cdef const i64[::1] S = seg
    cdef Py_ssize_t e = V.shape[0]
    cdef Py_ssize_t d = V.shape[1]
    out = np.zeros((n, d))
    arg = np.full((n, d), -1, dtype=np.int64)
    cdef double[:, ::1] O = out
    cdef i64[:, ::1] A = arg
    cdef Py_ssize_t t, c
    cdef i64 s_
    with nogil:
        for t in range(e):
            s_ = S[t]
            for c in range(d):
                if A[s_, c] < 0 or V[t, c] > O[s_, c]:
                    O[s_, c] = V[t, c]
                    A[s_, c] = t
    return out, arg
