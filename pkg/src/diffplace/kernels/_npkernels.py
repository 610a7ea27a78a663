"""Pure-numpy implementations of the hot kernels.

These are the reference semantics for the compiled backend: same arguments,
same tie rules, same accumulation order for the pair potential (contributing
pairs sorted by (i, j)).
"""

import numpy as np

# margin for the broad-phase interval test so pruning stays conservative
# against rounding differences vs. the gap arithmetic
_PRUNE_EPS = 1e-9


def hpwl_grad(coords, net_ptr, pin_owner, pin_off, want_grad=True):
    """Per-net half-perimeter extents and the HPWL subgradient.

    Pin positions are owner centers plus offsets.  The subgradient puts +1 on
    the owner of the max pin and -1 on the owner of the min pin per axis; ties
    go to the lowest pin index within the net.  Returns (net_hpwl, grad).
    """
    n = coords.shape[0]
    k = net_ptr.shape[0] - 1
    net_hpwl = np.zeros(k)
    grad = np.zeros((n, 2)) if want_grad else None
    if k == 0 or pin_owner.shape[0] == 0:
        return net_hpwl, grad

    lens = np.diff(net_ptr)
    if (lens == 0).any():
        keep = lens > 0
        sub_ptr = np.concatenate([[0], np.cumsum(lens[keep])])
        sub_hpwl, grad = hpwl_grad(coords, sub_ptr, pin_owner, pin_off, want_grad)
        net_hpwl[keep] = sub_hpwl
        return net_hpwl, grad

    p = pin_owner.shape[0]
    pos = coords[pin_owner] + pin_off
    starts = net_ptr[:-1]
    seg = np.repeat(np.arange(k), lens)
    idx = np.arange(p)

    for axis in (0, 1):
        v = pos[:, axis]
        vmax = np.maximum.reduceat(v, starts)
        vmin = np.minimum.reduceat(v, starts)
        net_hpwl += vmax - vmin
        if want_grad:
            imax = np.minimum.reduceat(np.where(v == vmax[seg], idx, p), starts)
            imin = np.minimum.reduceat(np.where(v == vmin[seg], idx, p), starts)
            np.add.at(grad[:, axis], pin_owner[imax], 1.0)
            np.add.at(grad[:, axis], pin_owner[imin], -1.0)
    return net_hpwl, grad


def _candidate_pairs_dense(m):
    iu, ju = np.triu_indices(m, k=1)
    return iu, ju


def _candidate_pairs_broadphase(lo, hi):
    # pairs whose x-intervals overlap or touch, found by a sorted sweep
    m = lo.shape[0]
    order = np.argsort(lo, kind="stable")
    lo_s = lo[order]
    hi_s = hi[order]
    ends = np.searchsorted(lo_s, hi_s + _PRUNE_EPS, side="right")
    counts = np.maximum(ends - np.arange(1, m + 1), 0)
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    first = np.repeat(np.arange(m), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    second = first + 1 + offsets
    a = order[first]
    b = order[second]
    i = np.minimum(a, b)
    j = np.maximum(a, b)
    keep = np.lexsort((j, i))
    return i[keep], j[keep]


def pair_potential(coords, sizes, group_ptr, broadphase=True):
    """Sum over object pairs of min(0, signed distance)^2, with gradient.

    Pairs are only formed within a group (group_ptr delimits circuits in a
    batch).  Returns (value per group, grad (n,2), overlapping-pair count per
    group).  The active axis for the gradient is x when the x-gap >= y-gap.
    """
    n = coords.shape[0]
    ngroups = group_ptr.shape[0] - 1
    value = np.zeros(ngroups)
    count = np.zeros(ngroups, dtype=np.int64)
    grad = np.zeros((n, 2))
    for g in range(ngroups):
        s, e = int(group_ptr[g]), int(group_ptr[g + 1])
        m = e - s
        if m < 2:
            continue
        cx = coords[s:e, 0]
        cy = coords[s:e, 1]
        hw = sizes[s:e, 0] * 0.5
        hh = sizes[s:e, 1] * 0.5
        if broadphase:
            i, j = _candidate_pairs_broadphase(cx - hw, cx + hw)
        else:
            i, j = _candidate_pairs_dense(m)
        if i.size == 0:
            continue
        gx = np.abs(cx[i] - cx[j]) - (hw[i] + hw[j])
        gy = np.abs(cy[i] - cy[j]) - (hh[i] + hh[j])
        d = np.maximum(gx, gy)
        mask = d < 0.0
        i = i[mask]
        j = j[mask]
        d = d[mask]
        if i.size == 0:
            continue
        value[g] = np.sum(d * d)
        count[g] = i.size
        coef = 2.0 * d
        use_x = gx[mask] >= gy[mask]
        sgn = np.where(use_x, np.sign(cx[i] - cx[j]), np.sign(cy[i] - cy[j]))
        axis = np.where(use_x, 0, 1)
        np.add.at(grad, (i + s, axis), coef * sgn)
        np.add.at(grad, (j + s, axis), -coef * sgn)
    return value, grad, count


def union_area(lox, loy, hix, hiy):
    """Exact area of the union of axis-aligned rectangles (slab sweep)."""
    keep = (hix > lox) & (hiy > loy)
    lox, loy, hix, hiy = lox[keep], loy[keep], hix[keep], hiy[keep]
    if lox.size == 0:
        return 0.0
    xs = np.unique(np.concatenate([lox, hix]))
    total = 0.0
    for x0, x1 in zip(xs[:-1], xs[1:]):
        act = (lox <= x0) & (hix >= x1)
        if not act.any():
            continue
        lo = loy[act]
        hi = hiy[act]
        order = np.argsort(lo, kind="stable")
        lo = lo[order]
        hi = hi[order]
        running = np.maximum.accumulate(hi)
        prev = np.concatenate([[-np.inf], running[:-1]])
        covered = np.sum(np.maximum(0.0, hi - np.maximum(lo, prev)))
        total += covered * (x1 - x0)
    return float(total)


def rudy_fill(lox, loy, hix, hiy, weights, grid_n):
    """Accumulate per-net densities onto a grid over the [-1,1]^2 canvas.

    Each cell gets weight * (overlap area of cell and box) / (cell area).
    Boxes are expected pre-clipped to the canvas with positive extents.
    Returned map is indexed [x-bin, y-bin].
    """
    pitch = 2.0 / grid_n
    grid = np.zeros((grid_n, grid_n))
    nb = lox.shape[0]
    edges = -1.0 + pitch * np.arange(grid_n + 1)
    for b in range(nb):
        i0 = min(max(int(np.floor((lox[b] + 1.0) / pitch)), 0), grid_n - 1)
        i1 = min(max(int(np.ceil((hix[b] + 1.0) / pitch)) - 1, 0), grid_n - 1)
        j0 = min(max(int(np.floor((loy[b] + 1.0) / pitch)), 0), grid_n - 1)
        j1 = min(max(int(np.ceil((hiy[b] + 1.0) / pitch)) - 1, 0), grid_n - 1)
        ox = np.minimum(hix[b], edges[i0 + 1 : i1 + 2]) - np.maximum(lox[b], edges[i0 : i1 + 1])
        oy = np.minimum(hiy[b], edges[j0 + 1 : j1 + 2]) - np.maximum(loy[b], edges[j0 : j1 + 1])
        ox = np.maximum(ox, 0.0)
        oy = np.maximum(oy, 0.0)
        grid[i0 : i1 + 1, j0 : j1 + 1] += weights[b] * np.outer(ox, oy) / (pitch * pitch)
    return grid


def segment_sum(values, seg, n):
    out = np.zeros((n, values.shape[1]))
    np.add.at(out, seg, values)
    return out


def segment_max(values, seg, n):
    """Per-segment max and the index of the first element attaining it.

    Empty segments yield value 0 and index -1; callers guarantee non-empty
    segments where the result is consumed (self-loops in the graph layers).
    """
    e, d = values.shape
    out = np.zeros((n, d))
    arg = np.full((n, d), -1, dtype=np.int64)
    if e == 0:
        return out, arg
    big = np.full((n, d), -np.inf)
    np.maximum.at(big, seg, values)
    pos = np.where(values == big[seg], np.arange(e)[:, None], e)
    first = np.full((n, d), e, dtype=np.int64)
    np.minimum.at(first, seg, pos)
    nonempty = first < e
    out[nonempty] = big[nonempty]
    arg[nonempty] = first[nonempty]
    return out, arg
