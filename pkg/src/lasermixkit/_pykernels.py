"""Pure-numpy implementations of the hot kernels.

These are the reference semantics; lasermixkit._kernels (Cython) mirrors them
op-for-op. Both backends keep IEEE arithmetic in the same order so their
outputs are bit-identical; the equivalence is asserted by tests/test_backends.
"""

import numpy as np

NAME = "python"

# Primitive kind codes shared with the compiled backend.
PRIM_PLANE = 0
PRIM_BOX = 1
PRIM_CYLINDER = 2


def bin_values(values, bounds):
    """Interval index per value: bounds[k] <= v < bounds[k+1].

    The last interval is closed on the right and out-of-range values clamp
    to the nearest boundary area.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    bounds = np.ascontiguousarray(bounds, dtype=np.float64)
    idx = np.searchsorted(bounds, values, side="right") - 1
    return np.clip(idx, 0, bounds.size - 2).astype(np.int64)


def rasterize(rows, cols, ranges, height, width):
    """Scatter points into an (height, width) grid, nearest range winning.

    Ties on range are broken by the lower point index. Returns (depth, index)
    grids; empty cells hold (inf, -1).
    """
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    ranges = np.ascontiguousarray(ranges, dtype=np.float64)
    depth = np.full((height, width), np.inf, dtype=np.float64)
    index = np.full((height, width), -1, dtype=np.int64)
    if rows.size:
        ids = np.arange(rows.size, dtype=np.int64)
        # Write in descending (range, id) order so the final writer per cell
        # is the nearest point (lowest id on exact ties).
        order = np.lexsort((ids, ranges))[::-1]
        depth[rows[order], cols[order]] = ranges[order]
        index[rows[order], cols[order]] = ids[order]
    return depth, index


def ray_cast(origin, dirs, prim_kinds, prim_data, max_range, t_eps):
    """Nearest-primitive intersection per ray.

    origin: (3,) ray origin shared by all rays.
    dirs: (R, 3) ray directions (need not be unit length, but are here).
    prim_kinds: (P,) kind codes; prim_data: (P, 8) packed parameters:
      plane    -> [z, ...]
      box      -> [xlo, ylo, zlo, xhi, yhi, zhi, ...]
      cylinder -> [cx, cy, zlo, zhi, radius, ...]
    Returns (t, prim) with t = inf and prim = -1 where nothing is hit within
    max_range. Earlier primitives win exact distance ties.
    """
    dirs = np.ascontiguousarray(dirs, dtype=np.float64)
    ox, oy, oz = (float(origin[0]), float(origin[1]), float(origin[2]))
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]
    n = dirs.shape[0]
    best_t = np.full(n, np.inf, dtype=np.float64)
    best_p = np.full(n, -1, dtype=np.int64)
    with np.errstate(divide="ignore", invalid="ignore"):
        for p in range(len(prim_kinds)):
            kind = int(prim_kinds[p])
            data = prim_data[p]
            if kind == PRIM_PLANE:
                t = (data[0] - oz) / dz
                cand = np.where((dz != 0.0) & (t > t_eps), t, np.inf)
            else:
                if kind == PRIM_BOX:
                    enter = np.full(n, -np.inf)
                    exit_ = np.full(n, np.inf)
                    for axis, (o, d) in enumerate(((ox, dx), (oy, dy), (oz, dz))):
                        lo, hi = data[axis], data[axis + 3]
                        t0 = (lo - o) / d
                        t1 = (hi - o) / d
                        swap = t0 > t1
                        t0, t1 = np.where(swap, t1, t0), np.where(swap, t0, t1)
                        parallel = d == 0.0
                        inside = parallel & (lo <= o) & (o <= hi)
                        t0 = np.where(parallel, np.where(inside, -np.inf, np.inf), t0)
                        t1 = np.where(parallel, np.where(inside, np.inf, -np.inf), t1)
                        enter = np.where(t0 > enter, t0, enter)
                        exit_ = np.where(t1 < exit_, t1, exit_)
                else:  # PRIM_CYLINDER
                    cx, cy, zlo, zhi, radius = data[:5]
                    rx = ox - cx
                    ry = oy - cy
                    a = dx * dx + dy * dy
                    b = 2.0 * (rx * dx + ry * dy)
                    c = rx * rx + ry * ry - radius * radius
                    disc = b * b - 4.0 * a * c
                    sq = np.sqrt(np.where(disc >= 0.0, disc, 0.0))
                    t1l = (-b - sq) / (2.0 * a)
                    t2l = (-b + sq) / (2.0 * a)
                    vertical = a == 0.0
                    inside_r = vertical & (c <= 0.0)
                    miss_lat = (~vertical) & (disc < 0.0)
                    t1l = np.where(vertical, np.where(inside_r, -np.inf, np.inf), t1l)
                    t2l = np.where(vertical, np.where(inside_r, np.inf, -np.inf), t2l)
                    tz0 = (zlo - oz) / dz
                    tz1 = (zhi - oz) / dz
                    zswap = tz0 > tz1
                    tz0, tz1 = np.where(zswap, tz1, tz0), np.where(zswap, tz0, tz1)
                    flat = dz == 0.0
                    inside_z = flat & (zlo <= oz) & (oz <= zhi)
                    tz0 = np.where(flat, np.where(inside_z, -np.inf, np.inf), tz0)
                    tz1 = np.where(flat, np.where(inside_z, np.inf, -np.inf), tz1)
                    enter = np.where(tz0 > t1l, tz0, t1l)
                    exit_ = np.where(tz1 < t2l, tz1, t2l)
                    enter = np.where(miss_lat, np.inf, enter)
                    exit_ = np.where(miss_lat, -np.inf, exit_)
                cand = np.where(
                    enter <= exit_,
                    np.where(enter > t_eps, enter, np.where(exit_ > t_eps, exit_, np.inf)),
                    np.inf,
                )
            better = cand < best_t
            best_t = np.where(better, cand, best_t)
            best_p = np.where(better, p, best_p)
    out_of_range = best_t > max_range
    best_t = np.where(out_of_range, np.inf, best_t)
    best_p = np.where(out_of_range, -1, best_p)
    return best_t, best_p
