# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of lasermixkit._pykernels.

Every arithmetic expression here mirrors the numpy reference with the same
operand order and the same branch structure, so the two backends produce
bit-identical float64 results. Keep it that way: no fused ops, no fast-math,
no reordering "optimisations".
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

NAME = "native"

PRIM_PLANE = 0
PRIM_BOX = 1
PRIM_CYLINDER = 2

cdef double INF = float("inf")


def bin_values(values, bounds):
    """Interval index per value; same contract as the numpy reference."""
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(bounds, dtype=np.float64)
    out_arr = np.empty(v.shape[0], dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t i, lo, hi, mid, k
    cdef Py_ssize_t last = nb - 2
    cdef double x
    for i in range(n):
        x = v[i]
        # rightmost insertion point, as np.searchsorted(side="right")
        lo = 0
        hi = nb
        while lo < hi:
            mid = (lo + hi) >> 1
            if b[mid] <= x:
                lo = mid + 1
            else:
                hi = mid
        k = lo - 1
        if k < 0:
            k = 0
        elif k > last:
            k = last
        out[i] = k
    return out_arr


def rasterize(rows, cols, ranges, height, width):
    """Nearest-wins scatter; ties on range go to the lower point index."""
    cdef long long[::1] r = np.ascontiguousarray(rows, dtype=np.int64)
    cdef long long[::1] c = np.ascontiguousarray(cols, dtype=np.int64)
    cdef double[::1] g = np.ascontiguousarray(ranges, dtype=np.float64)
    cdef Py_ssize_t h = height
    cdef Py_ssize_t w = width
    depth_arr = np.full((h, w), np.inf, dtype=np.float64)
    index_arr = np.full((h, w), -1, dtype=np.int64)
    cdef double[:, ::1] depth = depth_arr
    cdef long long[:, ::1] index = index_arr
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t i, row, col
    cdef double rng
    for i in range(n):
        row = r[i]
        col = c[i]
        rng = g[i]
        if rng < depth[row, col] or (rng == depth[row, col] and i < index[row, col]):
            depth[row, col] = rng
            index[row, col] = i
    return depth_arr, index_arr


def ray_cast(origin, dirs, prim_kinds, prim_data, max_range, t_eps):
    """Nearest-primitive intersection per ray; see the numpy reference."""
    cdef double[:, ::1] d = np.ascontiguousarray(dirs, dtype=np.float64)
    cdef long long[::1] kinds = np.ascontiguousarray(prim_kinds, dtype=np.int64)
    cdef double[:, ::1] data = np.ascontiguousarray(prim_data, dtype=np.float64)
    cdef double ox = origin[0]
    cdef double oy = origin[1]
    cdef double oz = origin[2]
    cdef double mr = max_range
    cdef double eps = t_eps
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t np_ = kinds.shape[0]
    t_arr = np.full(n, np.inf, dtype=np.float64)
    p_arr = np.full(n, -1, dtype=np.int64)
    cdef double[::1] best_t = t_arr
    cdef long long[::1] best_p = p_arr
    cdef Py_ssize_t i, p, axis
    cdef long long kind
    cdef double dx, dy, dz, t, cand, enter, exit_, t0, t1, tmp, lo, hi, o, dd
    cdef double cx, cy, zlo, zhi, radius, rx, ry, a, b, cc, disc, sq
    cdef double t1l, t2l, tz0, tz1
    cdef bint miss
    for i in range(n):
        dx = d[i, 0]
        dy = d[i, 1]
        dz = d[i, 2]
        for p in range(np_):
            kind = kinds[p]
            cand = INF
            if kind == PRIM_PLANE:
                if dz != 0.0:
                    t = (data[p, 0] - oz) / dz
                    if t > eps:
                        cand = t
            elif kind == PRIM_BOX:
                enter = -INF
                exit_ = INF
                miss = False
                for axis in range(3):
                    if axis == 0:
                        o = ox
                        dd = dx
                    elif axis == 1:
                        o = oy
                        dd = dy
                    else:
                        o = oz
                        dd = dz
                    lo = data[p, axis]
                    hi = data[p, axis + 3]
                    if dd == 0.0:
                        if lo <= o and o <= hi:
                            t0 = -INF
                            t1 = INF
                        else:
                            miss = True
                            break
                    else:
                        t0 = (lo - o) / dd
                        t1 = (hi - o) / dd
                        if t0 > t1:
                            tmp = t0
                            t0 = t1
                            t1 = tmp
                    if t0 > enter:
                        enter = t0
                    if t1 < exit_:
                        exit_ = t1
                if not miss and enter <= exit_:
                    if enter > eps:
                        cand = enter
                    elif exit_ > eps:
                        cand = exit_
            else:  # PRIM_CYLINDER
                cx = data[p, 0]
                cy = data[p, 1]
                zlo = data[p, 2]
                zhi = data[p, 3]
                radius = data[p, 4]
                rx = ox - cx
                ry = oy - cy
                a = dx * dx + dy * dy
                miss = False
                if a == 0.0:
                    cc = rx * rx + ry * ry - radius * radius
                    if cc <= 0.0:
                        t1l = -INF
                        t2l = INF
                    else:
                        miss = True
                else:
                    b = 2.0 * (rx * dx + ry * dy)
                    cc = rx * rx + ry * ry - radius * radius
                    disc = b * b - 4.0 * a * cc
                    if disc < 0.0:
                        miss = True
                    else:
                        sq = sqrt(disc)
                        t1l = (-b - sq) / (2.0 * a)
                        t2l = (-b + sq) / (2.0 * a)
                if not miss:
                    if dz == 0.0:
                        if zlo <= oz and oz <= zhi:
                            tz0 = -INF
                            tz1 = INF
                        else:
                            miss = True
                    else:
                        tz0 = (zlo - oz) / dz
                        tz1 = (zhi - oz) / dz
                        if tz0 > tz1:
                            tmp = tz0
                            tz0 = tz1
                            tz1 = tmp
                if not miss:
                    if tz0 > t1l:
                        enter = tz0
                    else:
                        enter = t1l
                    if tz1 < t2l:
                        exit_ = tz1
                    else:
                        exit_ = t2l
                    if enter <= exit_:
                        if enter > eps:
                            cand = enter
                        elif exit_ > eps:
                            cand = exit_
            if cand < best_t[i]:
                best_t[i] = cand
                best_p[i] = p
        if best_t[i] > mr:
            best_t[i] = INF
            best_p[i] = -1
    return t_arr, p_arr
