"""Placement quality metrics: HPWL, legality, RUDY congestion, and the
analytic gradients consumed by guided sampling.

All functions are pure: same inputs give same outputs, no hidden state.
Arithmetic is double precision throughout.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .netlist import Placement

DEFAULT_RUDY_GRID = 256
_BOUNDS_SLACK = 1e-12


def _coords_of(placement):
    if isinstance(placement, Placement):
        return placement.coords
    return np.ascontiguousarray(placement, dtype=np.float64).reshape(-1, 2)


@dataclass
class MetricReport:
    """Summary of placement quality for one (netlist, placement) pair."""

    hpwl: float
    legality: float
    rudy_scalar: float
    rudy_map: np.ndarray
    hpwl_raw: float | None = None  # original benchmark units when a scale is known

    def to_dict(self, include_map=False):
        d = {
            "hpwl": self.hpwl,
            "legality": self.legality,
            "rudy_scalar": self.rudy_scalar,
        }
        if self.hpwl_raw is not None:
            d["hpwl_raw"] = self.hpwl_raw
        if include_map:
            d["rudy_map"] = self.rudy_map.tolist()
        return d


def hpwl(netlist, placement):
    """Half-perimeter wirelength over nets (or over edges as 2-pin nets)."""
    coords = _coords_of(placement)
    ptr, owner, off = netlist.hpwl_csr()
    net_hpwl, _ = kernels.hpwl_grad(coords, ptr, owner, off, False)
    return float(net_hpwl.sum())


def hpwl_subgradient(netlist, placement):
    """HPWL and its subgradient w.r.t. object centers.

    Per net and axis: +1 to the owner of the max pin, -1 to the owner of the
    min pin; ties resolved to the lowest pin index.
    """
    coords = _coords_of(placement)
    ptr, owner, off = netlist.hpwl_csr()
    net_hpwl, grad = kernels.hpwl_grad(coords, ptr, owner, off, True)
    return float(net_hpwl.sum()), grad


def hpwl_per_group(netlist, placement, group_ptr):
    """Per-circuit HPWL for a batched (disjoint union) netlist."""
    coords = _coords_of(placement)
    ptr, owner, off = netlist.hpwl_csr()
    net_hpwl, _ = kernels.hpwl_grad(coords, ptr, owner, off, False)
    out = np.zeros(group_ptr.shape[0] - 1)
    if net_hpwl.shape[0]:
        nonempty = np.diff(ptr) > 0
        first_owner = np.zeros(net_hpwl.shape[0], dtype=np.int64)
        first_owner[nonempty] = owner[ptr[:-1][nonempty]]
        g = np.searchsorted(group_ptr, first_owner, side="right") - 1
        np.add.at(out, g, net_hpwl)
    return out


def signed_distance(netlist, placement, i, j):
    """max of per-axis gaps between rectangles i and j; negative iff they
    overlap with positive area, zero when touching."""
    if i == j:
        raise ValueError("signed_distance needs two distinct objects")
    coords = _coords_of(placement)
    w, h = netlist.sizes[:, 0], netlist.sizes[:, 1]
    gx = abs(coords[i, 0] - coords[j, 0]) - (w[i] + w[j]) / 2.0
    gy = abs(coords[i, 1] - coords[j, 1]) - (h[i] + h[j]) / 2.0
    return float(max(gx, gy))


def boundary_potential(netlist, placement, bound=1.0):
    """One-sided squared clearance penalties against the four canvas walls."""
    coords = _coords_of(placement)
    hw = netlist.sizes[:, 0] * 0.5
    hh = netlist.sizes[:, 1] * 0.5
    d_left = np.minimum(0.0, coords[:, 0] - hw + bound)
    d_right = np.minimum(0.0, bound - coords[:, 0] - hw)
    d_bot = np.minimum(0.0, coords[:, 1] - hh + bound)
    d_top = np.minimum(0.0, bound - coords[:, 1] - hh)
    per_obj = d_left**2 + d_right**2 + d_bot**2 + d_top**2
    grad = np.zeros_like(coords)
    grad[:, 0] = 2.0 * d_left - 2.0 * d_right
    grad[:, 1] = 2.0 * d_bot - 2.0 * d_top
    return per_obj, grad


def legality_potential(netlist, placement, bound=1.0):
    """Sum over pairs of min(0, signed distance)^2 plus the canvas-wall terms,
    with the exact analytic gradient."""
    values, grad = legality_potential_groups(netlist, placement, None, bound)
    return float(values[0]), grad


def legality_potential_groups(netlist, placement, group_ptr, bound=1.0, broadphase=True):
    """Batched legality potential: one value per circuit group, shared grad."""
    coords = _coords_of(placement)
    n = coords.shape[0]
    if group_ptr is None:
        group_ptr = np.asarray([0, n], dtype=np.int64)
    pair_val, grad, _ = kernels.pair_potential(coords, netlist.sizes, group_ptr, broadphase)
    b_per_obj, b_grad = boundary_potential(netlist, placement, bound)
    grad += b_grad
    values = pair_val + np.add.reduceat(
        np.concatenate([b_per_obj, [0.0]]), group_ptr[:-1]
    ) * (np.diff(group_ptr) > 0)
    return values, grad


def overlapping_pairs(netlist, placement):
    """Indices (i, j) of object pairs that overlap with positive area."""
    coords = _coords_of(placement)
    n = coords.shape[0]
    if n < 2:
        return np.empty((0, 2), dtype=np.int64)
    hw = netlist.sizes[:, 0] * 0.5
    hh = netlist.sizes[:, 1] * 0.5
    iu, ju = np.triu_indices(n, k=1)
    gx = np.abs(coords[iu, 0] - coords[ju, 0]) - (hw[iu] + hw[ju])
    gy = np.abs(coords[iu, 1] - coords[ju, 1]) - (hh[iu] + hh[ju])
    mask = np.maximum(gx, gy) < 0
    return np.stack([iu[mask], ju[mask]], axis=1).astype(np.int64)


def legality_score(netlist, placement):
    """Union area of the placed rectangles clipped to the canvas, divided by
    the sum of the individual areas.  Exactly 1.0 iff no pair overlaps and
    all objects are in bounds."""
    coords = _coords_of(placement)
    sizes = netlist.sizes
    total = float((sizes[:, 0] * sizes[:, 1]).sum())
    if total <= 0.0:
        raise ValueError("legality_score of a zero-total-area netlist")
    hw = sizes[:, 0] * 0.5
    hh = sizes[:, 1] * 0.5
    lox = coords[:, 0] - hw
    hix = coords[:, 0] + hw
    loy = coords[:, 1] - hh
    hiy = coords[:, 1] + hh

    group_ptr = np.asarray([0, coords.shape[0]], dtype=np.int64)
    _, _, count = kernels.pair_potential(coords, sizes, group_ptr, True)
    in_bounds = (
        (lox >= -1.0 - _BOUNDS_SLACK).all()
        and (hix <= 1.0 + _BOUNDS_SLACK).all()
        and (loy >= -1.0 - _BOUNDS_SLACK).all()
        and (hiy <= 1.0 + _BOUNDS_SLACK).all()
    )
    if count.sum() == 0 and in_bounds:
        return 1.0
    union = kernels.union_area(
        np.maximum(lox, -1.0),
        np.maximum(loy, -1.0),
        np.minimum(hix, 1.0),
        np.minimum(hiy, 1.0),
    )
    return union / total


def _net_bboxes(netlist, coords):
    ptr, owner, off = netlist.hpwl_csr()
    k = ptr.shape[0] - 1
    if k == 0 or owner.shape[0] == 0:
        return (np.empty(0),) * 4
    pos = coords[owner] + off
    lens = np.diff(ptr)
    keep = lens > 0
    starts = ptr[:-1][keep]
    lox = np.minimum.reduceat(pos[:, 0], starts)
    hix = np.maximum.reduceat(pos[:, 0], starts)
    loy = np.minimum.reduceat(pos[:, 1], starts)
    hiy = np.maximum.reduceat(pos[:, 1], starts)
    return lox, loy, hix, hiy


def rudy(netlist, placement, grid_n=DEFAULT_RUDY_GRID):
    """RUDY congestion map and scalar.

    Each net spreads density (dx + dy) / (dx * dy) uniformly over its pin
    bounding box (degenerate extents floored at one cell pitch); cells
    accumulate the density weighted by fractional overlap.  The scalar is the
    mean of the top 10% densest cells.
    """
    if grid_n < 1:
        raise ValueError("grid_n must be >= 1")
    coords = _coords_of(placement)
    lox, loy, hix, hiy = _net_bboxes(netlist, coords)
    if lox.shape[0] == 0:
        grid = np.zeros((grid_n, grid_n))
        return grid, 0.0
    pitch = 2.0 / grid_n
    dx = np.maximum(hix - lox, pitch)
    dy = np.maximum(hiy - loy, pitch)
    cx = (lox + hix) * 0.5
    cy = (loy + hiy) * 0.5
    weights = (dx + dy) / (dx * dy)
    grid = kernels.rudy_fill(
        np.maximum(cx - dx * 0.5, -1.0),
        np.maximum(cy - dy * 0.5, -1.0),
        np.minimum(cx + dx * 0.5, 1.0),
        np.minimum(cy + dy * 0.5, 1.0),
        weights,
        grid_n,
    )
    flat = np.sort(grid.reshape(-1))[::-1]
    top = max(1, int(np.ceil(flat.size / 10)))
    return grid, float(flat[:top].mean())


def hpwl_ratio(generated_hpwl, dataset_hpwl):
    """Quotient of generated over dataset HPWL for the same netlist."""
    if dataset_hpwl == 0:
        raise ValueError("dataset HPWL is zero; ratio undefined")
    return generated_hpwl / dataset_hpwl


def evaluate(netlist, placement, grid_n=DEFAULT_RUDY_GRID, unit_scale=None):
    """Full MetricReport for a placement."""
    w = hpwl(netlist, placement)
    rudy_map, rudy_scalar = rudy(netlist, placement, grid_n)
    return MetricReport(
        hpwl=w,
        legality=legality_score(netlist, placement),
        rudy_scalar=rudy_scalar,
        rudy_map=rudy_map,
        hpwl_raw=None if unit_scale is None else w * unit_scale,
    )
