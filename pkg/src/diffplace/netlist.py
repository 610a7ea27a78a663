"""Netlist and placement data model.

Coordinates and sizes are normalized to the square canvas [-1, 1] x [-1, 1],
so the full canvas width is 2.  Objects are axis-aligned rectangles addressed
by their center; pins are offsets from the owner's center.  Connectivity is a
graph of 2-pin edges, optionally backed by the original multi-pin nets.
"""

from dataclasses import dataclass

import numpy as np

CANVAS_HALF = 1.0
CANVAS_AREA = 4.0


@dataclass(frozen=True)
class Pin:
    """A pin on an object: owner index plus offset from the owner's center."""

    owner: int
    dx: float
    dy: float


class Netlist:
    """Immutable-by-convention netlist: object sizes, 2-pin edges, optional nets.

    Attributes
    ----------
    sizes : (n, 2) float64, width/height per object
    edges : (m, 2) int64, undirected endpoint indices
    edge_attr : (m, 4) float64, source and destination pin offsets
    net_ptr / net_pin_owner / net_pin_offset : CSR view of multi-pin nets,
        or None when the netlist has no hypergraph
    fixed_mask : (n,) bool or None, True for terminals that never move
    macro_mask : (n,) bool or None, True for macros (rendering/convert only)
    names : list of object names or None (kept for benchmark round trips)
    """

    def __init__(
        self,
        sizes,
        edges=None,
        edge_attr=None,
        nets=None,
        fixed_mask=None,
        macro_mask=None,
        names=None,
    ):
        self.sizes = np.ascontiguousarray(sizes, dtype=np.float64).reshape(-1, 2)
        n = self.sizes.shape[0]
        if edges is None:
            edges = np.empty((0, 2), dtype=np.int64)
            edge_attr = np.empty((0, 4), dtype=np.float64)
        self.edges = np.ascontiguousarray(edges, dtype=np.int64).reshape(-1, 2)
        if edge_attr is None:
            edge_attr = np.zeros((self.edges.shape[0], 4))
        self.edge_attr = np.ascontiguousarray(edge_attr, dtype=np.float64).reshape(-1, 4)
        if self.edge_attr.shape[0] != self.edges.shape[0]:
            raise ValueError("edge_attr length does not match edges")

        if nets is None:
            self.net_ptr = None
            self.net_pin_owner = None
            self.net_pin_offset = None
        elif isinstance(nets, tuple):
            self.net_ptr, self.net_pin_owner, self.net_pin_offset = (
                np.ascontiguousarray(nets[0], dtype=np.int64),
                np.ascontiguousarray(nets[1], dtype=np.int64),
                np.ascontiguousarray(nets[2], dtype=np.float64).reshape(-1, 2),
            )
        else:
            ptr = [0]
            owners = []
            offs = []
            for net in nets:
                for pin in net:
                    owners.append(pin.owner)
                    offs.append((pin.dx, pin.dy))
                ptr.append(len(owners))
            self.net_ptr = np.asarray(ptr, dtype=np.int64)
            self.net_pin_owner = np.asarray(owners, dtype=np.int64)
            self.net_pin_offset = (
                np.asarray(offs, dtype=np.float64).reshape(-1, 2)
                if offs
                else np.empty((0, 2))
            )

        self.fixed_mask = (
            None if fixed_mask is None else np.ascontiguousarray(fixed_mask, dtype=bool)
        )
        self.macro_mask = (
            None if macro_mask is None else np.ascontiguousarray(macro_mask, dtype=bool)
        )
        self.names = list(names) if names is not None else None
        if self.names is not None and len(self.names) != n:
            raise ValueError("names length does not match object count")

        for arr in (self.sizes, self.edges, self.edge_attr):
            arr.setflags(write=False)
        self._edge_csr = None

    @property
    def num_objects(self):
        return self.sizes.shape[0]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    @property
    def num_nets(self):
        return 0 if self.net_ptr is None else self.net_ptr.shape[0] - 1

    def net_pins(self, k):
        """Pins of net k as a list of Pin."""
        s, e = self.net_ptr[k], self.net_ptr[k + 1]
        return [
            Pin(int(self.net_pin_owner[i]), *self.net_pin_offset[i]) for i in range(s, e)
        ]

    def areas(self):
        return self.sizes[:, 0] * self.sizes[:, 1]

    def movable_mask(self):
        if self.fixed_mask is None:
            return np.ones(self.num_objects, dtype=bool)
        return ~self.fixed_mask

    def hpwl_csr(self):
        """CSR net view used by the HPWL kernels.

        Uses the multi-pin nets when present, otherwise each edge counts as a
        2-pin net.  Cached; the netlist is immutable after construction.
        """
        if self.net_ptr is not None:
            return self.net_ptr, self.net_pin_owner, self.net_pin_offset
        if self._edge_csr is None:
            m = self.num_edges
            ptr = np.arange(0, 2 * m + 1, 2, dtype=np.int64)
            owner = self.edges.reshape(-1).copy()
            off = self.edge_attr.reshape(-1, 2).copy()
            self._edge_csr = (ptr, owner, off)
        return self._edge_csr

    @classmethod
    def build(cls, objects, edges=(), nets=None, fixed=None, macro=None, names=None):
        """Convenience constructor from plain python structures.

        objects: iterable of (width, height); edges: iterable of
        (i, j, (sdx, sdy), (ddx, ddy)); nets: iterable of iterables of Pin.
        """
        sizes = np.asarray([(w, h) for w, h in objects], dtype=np.float64).reshape(-1, 2)
        eidx = []
        eattr = []
        for i, j, soff, doff in edges:
            eidx.append((i, j))
            eattr.append((soff[0], soff[1], doff[0], doff[1]))
        return cls(
            sizes,
            np.asarray(eidx, dtype=np.int64).reshape(-1, 2),
            np.asarray(eattr, dtype=np.float64).reshape(-1, 4),
            nets=nets,
            fixed_mask=fixed,
            macro_mask=macro,
            names=names,
        )


@dataclass
class Placement:
    """Per-object 2D center coordinates, normalized units."""

    coords: np.ndarray

    def __post_init__(self):
        self.coords = np.ascontiguousarray(self.coords, dtype=np.float64).reshape(-1, 2)

    @property
    def num_objects(self):
        return self.coords.shape[0]


class NetlistError(ValueError):
    """Raised for structurally invalid netlist inputs."""


def hypergraph_to_edges(netlist):
    """Expand multi-pin nets into driver-to-sink 2-pin edges.

    The first pin of each net is the driver.  One edge is emitted per sink pin
    whose owner differs from the driver's owner; nets entirely inside a single
    object emit nothing.  The original nets are retained for HPWL.
    """
    if netlist.net_ptr is None:
        raise NetlistError("netlist has no nets to expand")
    ptr, owner, off = netlist.net_ptr, netlist.net_pin_owner, netlist.net_pin_offset
    eidx = []
    eattr = []
    for k in range(netlist.num_nets):
        s, e = int(ptr[k]), int(ptr[k + 1])
        if e - s < 2:
            raise NetlistError(f"net {k} has {e - s} pin(s); at least 2 required")
        d_owner = int(owner[s])
        d_off = off[s]
        for t in range(s + 1, e):
            r_owner = int(owner[t])
            if r_owner == d_owner:
                continue
            eidx.append((d_owner, r_owner))
            eattr.append((d_off[0], d_off[1], off[t, 0], off[t, 1]))
    return Netlist(
        netlist.sizes,
        np.asarray(eidx, dtype=np.int64).reshape(-1, 2),
        np.asarray(eattr, dtype=np.float64).reshape(-1, 4),
        nets=(ptr, owner, off),
        fixed_mask=netlist.fixed_mask,
        macro_mask=netlist.macro_mask,
        names=netlist.names,
    )


def _check_pin(violations, label, owner, dx, dy, sizes, n, slack=1e-9):
    if not (0 <= owner < n):
        violations.append(f"{label}: owner index {owner} out of range [0, {n})")
        return
    hw, hh = sizes[owner, 0] * 0.5, sizes[owner, 1] * 0.5
    if abs(dx) > hw + slack or abs(dy) > hh + slack:
        violations.append(
            f"{label}: offset ({dx:g}, {dy:g}) outside object {owner} "
            f"of half-size ({hw:g}, {hh:g})"
        )


def validate(netlist, placement=None):
    """Check all structural invariants; returns a list of violation strings."""
    v = []
    n = netlist.num_objects
    sizes = netlist.sizes
    for i in range(n):
        w, h = sizes[i]
        if not (0.0 < w <= 2.0) or not (0.0 < h <= 2.0):
            v.append(f"object {i}: size ({w:g}, {h:g}) outside (0, 2]")

    seen = {}
    for k in range(netlist.num_edges):
        i, j = int(netlist.edges[k, 0]), int(netlist.edges[k, 1])
        if not (0 <= i < n) or not (0 <= j < n):
            v.append(f"edge {k}: endpoint ({i}, {j}) out of range [0, {n})")
            continue
        if i == j:
            v.append(f"edge {k}: self-loop on object {i}")
            continue
        a = netlist.edge_attr[k]
        _check_pin(v, f"edge {k} source pin", i, a[0], a[1], sizes, n)
        _check_pin(v, f"edge {k} dest pin", j, a[2], a[3], sizes, n)
        key = (i, j, a[0], a[1], a[2], a[3]) if i < j else (j, i, a[2], a[3], a[0], a[1])
        if key in seen:
            v.append(f"edge {k}: duplicate of edge {seen[key]} with identical pins")
        else:
            seen[key] = k

    if netlist.net_ptr is not None:
        for k in range(netlist.num_nets):
            s, e = int(netlist.net_ptr[k]), int(netlist.net_ptr[k + 1])
            for t in range(s, e):
                _check_pin(
                    v,
                    f"net {k} pin {t - s}",
                    int(netlist.net_pin_owner[t]),
                    netlist.net_pin_offset[t, 0],
                    netlist.net_pin_offset[t, 1],
                    sizes,
                    n,
                )

    if placement is not None:
        coords = placement.coords if isinstance(placement, Placement) else placement
        if coords.shape[0] != n:
            v.append(f"placement: {coords.shape[0]} coordinates for {n} objects")
        elif not np.isfinite(coords).all():
            bad = np.nonzero(~np.isfinite(coords).all(axis=1))[0]
            v.append(f"placement: non-finite coordinates for objects {bad.tolist()}")
    return v


def concat_netlists(netlists):
    """Disjoint union of netlists for batched processing.

    Returns (netlist, group_ptr) where group_ptr delimits each input's object
    range in the concatenated arrays.
    """
    sizes = []
    edges = []
    attrs = []
    fixed = []
    ptr = [0]
    offset = 0
    any_fixed = any(nl.fixed_mask is not None for nl in netlists)
    for nl in netlists:
        sizes.append(nl.sizes)
        if nl.num_edges:
            edges.append(nl.edges + offset)
            attrs.append(nl.edge_attr)
        if any_fixed:
            fixed.append(
                nl.fixed_mask
                if nl.fixed_mask is not None
                else np.zeros(nl.num_objects, dtype=bool)
            )
        offset += nl.num_objects
        ptr.append(offset)
    merged = Netlist(
        np.concatenate(sizes) if sizes else np.empty((0, 2)),
        np.concatenate(edges) if edges else None,
        np.concatenate(attrs) if attrs else None,
        fixed_mask=np.concatenate(fixed) if any_fixed else None,
    )
    return merged, np.asarray(ptr, dtype=np.int64)
