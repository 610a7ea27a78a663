"""GSRC Bookshelf ingestion (.aux/.nodes/.nets/.pl/.scl subset) and export.

Coordinates are normalized so the die's longer dimension maps to [-1, 1] with
the shorter one centered (aspect preserved); the unit scale is retained so
HPWL can be reported in original units.  Node positions in .pl files are
lower-left corners; pin offsets in .nets are relative to node centers.
Parsers reject rather than guess: unrecognized directives raise with file and
line number.
"""

import math
import os
from dataclasses import dataclass

import numpy as np

from .netlist import Netlist, Placement


class BookshelfError(ValueError):
    pass


@dataclass
class BookshelfCircuit:
    netlist: Netlist
    placement: Placement | None
    unit_scale: float  # original units per normalized unit
    die: tuple  # (xlo, ylo, xhi, yhi) in original units

    @property
    def die_center(self):
        xlo, ylo, xhi, yhi = self.die
        return (xlo + xhi) / 2.0, (ylo + yhi) / 2.0

    def denormalize(self, coords):
        cx, cy = self.die_center
        out = np.asarray(coords, dtype=np.float64).reshape(-1, 2) * self.unit_scale
        out[:, 0] += cx
        out[:, 1] += cy
        return out

    def normalize(self, coords):
        cx, cy = self.die_center
        out = np.asarray(coords, dtype=np.float64).reshape(-1, 2).copy()
        out[:, 0] -= cx
        out[:, 1] -= cy
        return out / self.unit_scale


def _content_lines(path):
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if line:
                yield lineno, line


def _parse_nodes(path):
    names = []
    sizes = []
    terminal = []
    declared = {}
    for lineno, line in _content_lines(path):
        if line.startswith("UCLA"):
            continue
        if ":" in line and line.split(":")[0].strip() in ("NumNodes", "NumTerminals"):
            key, val = (s.strip() for s in line.split(":", 1))
            declared[key] = int(val)
            continue
        parts = line.split()
        if len(parts) < 3:
            raise BookshelfError(f"{path}:{lineno}: malformed node line: {line!r}")
        name, w, h = parts[0], parts[1], parts[2]
        flag = parts[3] if len(parts) > 3 else ""
        if flag not in ("", "terminal", "terminal_NI"):
            raise BookshelfError(f"{path}:{lineno}: unrecognized node flag {flag!r}")
        try:
            sizes.append((float(w), float(h)))
        except ValueError as exc:
            raise BookshelfError(f"{path}:{lineno}: bad node size: {line!r}") from exc
        names.append(name)
        terminal.append(flag != "")
    if "NumNodes" in declared and declared["NumNodes"] != len(names):
        raise BookshelfError(
            f"{path}: NumNodes is {declared['NumNodes']} but {len(names)} nodes found"
        )
    if "NumTerminals" in declared and declared["NumTerminals"] != sum(terminal):
        raise BookshelfError(
            f"{path}: NumTerminals is {declared['NumTerminals']} "
            f"but {sum(terminal)} terminals found"
        )
    return names, np.asarray(sizes, dtype=np.float64), np.asarray(terminal, dtype=bool)


def _parse_nets(path, name_to_idx):
    nets = []
    declared = {}
    current = None
    expect = 0
    for lineno, line in _content_lines(path):
        if line.startswith("UCLA"):
            continue
        head = line.split(":")[0].strip()
        if head in ("NumNets", "NumPins"):
            declared[head] = int(line.split(":", 1)[1].strip())
            continue
        if line.startswith("NetDegree"):
            if current is not None and len(current) != expect:
                raise BookshelfError(
                    f"{path}:{lineno}: previous net has {len(current)} pins, "
                    f"NetDegree said {expect}"
                )
            rest = line.split(":", 1)[1].split()
            expect = int(rest[0])
            current = []
            nets.append(current)
            continue
        if current is None:
            raise BookshelfError(f"{path}:{lineno}: pin line before any NetDegree")
        parts = line.replace(":", " ").split()
        name = parts[0]
        if name not in name_to_idx:
            raise BookshelfError(
                f"{path}:{lineno}: net references unknown node {name!r}"
            )
        if len(parts) >= 2 and parts[1] not in ("I", "O", "B"):
            raise BookshelfError(
                f"{path}:{lineno}: unrecognized pin direction {parts[1]!r}"
            )
        dx = float(parts[2]) if len(parts) >= 4 else 0.0
        dy = float(parts[3]) if len(parts) >= 4 else 0.0
        current.append((name_to_idx[name], dx, dy))
    if "NumNets" in declared and declared["NumNets"] != len(nets):
        raise BookshelfError(
            f"{path}: NumNets is {declared['NumNets']} but {len(nets)} nets found"
        )
    total_pins = sum(len(n) for n in nets)
    if "NumPins" in declared and declared["NumPins"] != total_pins:
        raise BookshelfError(
            f"{path}: NumPins is {declared['NumPins']} but {total_pins} pins found"
        )
    return nets


def _parse_pl(path, name_to_idx, n):
    coords = np.full((n, 2), np.nan)
    fixed = np.zeros(n, dtype=bool)
    for lineno, line in _content_lines(path):
        if line.startswith("UCLA"):
            continue
        parts = line.replace(":", " ").split()
        if len(parts) < 3:
            raise BookshelfError(f"{path}:{lineno}: malformed placement line: {line!r}")
        name = parts[0]
        if name not in name_to_idx:
            raise BookshelfError(
                f"{path}:{lineno}: placement references unknown node {name!r}"
            )
        idx = name_to_idx[name]
        coords[idx, 0] = float(parts[1])
        coords[idx, 1] = float(parts[2])
        fixed[idx] = any(p.startswith("/FIXED") for p in parts[3:])
    if np.isnan(coords).any():
        missing = [i for i in range(n) if np.isnan(coords[i]).any()]
        raise BookshelfError(f"{path}: nodes without placement: {missing[:5]}")
    return coords, fixed


def _parse_scl(path):
    """Return (xlo, ylo, xhi, yhi, row_height) of the core rows."""
    xlo = ylo = math.inf
    xhi = yhi = -math.inf
    row_height = 0.0
    coord = height = origin = sites = None
    spacing = 1.0
    in_row = False
    for lineno, line in _content_lines(path):
        if line.startswith("UCLA") or line.split(":")[0].strip() == "NumRows":
            continue
        if line.startswith("CoreRow"):
            in_row = True
            coord = height = origin = sites = None
            spacing = 1.0
            continue
        if line.startswith("End"):
            if not in_row or None in (coord, height, origin, sites):
                raise BookshelfError(f"{path}:{lineno}: incomplete CoreRow")
            xlo = min(xlo, origin)
            xhi = max(xhi, origin + sites * spacing)
            ylo = min(ylo, coord)
            yhi = max(yhi, coord + height)
            row_height = max(row_height, height)
            in_row = False
            continue
        if not in_row:
            raise BookshelfError(f"{path}:{lineno}: unrecognized directive: {line!r}")
        for chunk in line.split("  "):
            chunk = chunk.strip()
            if not chunk or ":" not in chunk:
                continue
            key, val = (s.strip() for s in chunk.split(":", 1))
            val = val.split()[0]
            if key == "Coordinate":
                coord = float(val)
            elif key == "Height":
                height = float(val)
            elif key == "SubrowOrigin":
                origin = float(val)
            elif key == "NumSites":
                sites = float(val)
            elif key == "Sitespacing":
                spacing = float(val)
            # Sitewidth, Siteorient, Sitesymmetry are accepted and ignored
    if not math.isfinite(xlo):
        raise BookshelfError(f"{path}: no core rows found")
    return xlo, ylo, xhi, yhi, row_height


def _find_files(aux_or_dir):
    """Resolve the .nodes/.nets/.pl/.scl paths from an .aux file or a
    directory containing exactly one benchmark."""
    if os.path.isdir(aux_or_dir):
        auxes = [f for f in sorted(os.listdir(aux_or_dir)) if f.endswith(".aux")]
        if auxes:
            return _find_files(os.path.join(aux_or_dir, auxes[0]))
        files = {}
        for f in sorted(os.listdir(aux_or_dir)):
            for ext in (".nodes", ".nets", ".pl", ".scl"):
                if f.endswith(ext) and ext not in files:
                    files[ext] = os.path.join(aux_or_dir, f)
        if ".nodes" not in files or ".nets" not in files:
            raise BookshelfError(f"{aux_or_dir}: no .nodes/.nets files found")
        return files
    base = os.path.dirname(aux_or_dir)
    files = {}
    with open(aux_or_dir, "r", encoding="utf-8") as f:
        for line in f:
            if ":" not in line:
                continue
            for tok in line.split(":", 1)[1].split():
                for ext in (".nodes", ".nets", ".pl", ".scl"):
                    # .pl/.scl listed in the aux may legitimately be absent
                    path = os.path.join(base, tok)
                    if tok.endswith(ext) and (
                        ext in (".nodes", ".nets") or os.path.exists(path)
                    ):
                        files[ext] = path
    if ".nodes" not in files or ".nets" not in files:
        raise BookshelfError(f"{aux_or_dir}: aux file does not list .nodes/.nets")
    return files


def parse_bookshelf(aux_or_dir):
    """Parse a Bookshelf benchmark into a normalized BookshelfCircuit."""
    files = _find_files(aux_or_dir)
    names, sizes, terminal = _parse_nodes(files[".nodes"])
    name_to_idx = {n: i for i, n in enumerate(names)}
    if len(name_to_idx) != len(names):
        dupes = len(names) - len(name_to_idx)
        raise BookshelfError(f"{files['.nodes']}: {dupes} duplicate node name(s)")
    nets = _parse_nets(files[".nets"], name_to_idx)

    coords_ll = None
    fixed = terminal.copy()
    if ".pl" in files:
        coords_ll, pl_fixed = _parse_pl(files[".pl"], name_to_idx, len(names))
        fixed |= pl_fixed

    row_height = None
    if ".scl" in files:
        xlo, ylo, xhi, yhi, row_height = _parse_scl(files[".scl"])
        die = (xlo, ylo, xhi, yhi)
    elif coords_ll is not None:
        die = (
            float(coords_ll[:, 0].min()),
            float(coords_ll[:, 1].min()),
            float((coords_ll[:, 0] + sizes[:, 0]).max()),
            float((coords_ll[:, 1] + sizes[:, 1]).max()),
        )
    else:
        # no geometry reference at all: square die sized for 50% density
        side = math.sqrt(2.0 * float((sizes[:, 0] * sizes[:, 1]).sum()))
        die = (0.0, 0.0, side, side)

    unit_scale = max(die[2] - die[0], die[3] - die[1]) / 2.0
    if unit_scale <= 0:
        raise BookshelfError("degenerate die bounds")
    norm_sizes = sizes / unit_scale

    macro = None
    if row_height is not None:
        macro = (~terminal) & (sizes[:, 1] > row_height)

    net_pins = [[(o, dx / unit_scale, dy / unit_scale) for o, dx, dy in net] for net in nets]
    ptr = [0]
    owners = []
    offs = []
    for net in net_pins:
        for o, dx, dy in net:
            owners.append(o)
            offs.append((dx, dy))
        ptr.append(len(owners))
    netlist = Netlist(
        norm_sizes,
        nets=(
            np.asarray(ptr, dtype=np.int64),
            np.asarray(owners, dtype=np.int64),
            np.asarray(offs, dtype=np.float64).reshape(-1, 2),
        ),
        fixed_mask=fixed,
        macro_mask=macro,
        names=names,
    )

    placement = None
    if coords_ll is not None:
        centers = coords_ll + sizes / 2.0
        cx, cy = (die[0] + die[2]) / 2.0, (die[1] + die[3]) / 2.0
        norm = (centers - [cx, cy]) / unit_scale
        placement = Placement(norm)

    return BookshelfCircuit(netlist, placement, unit_scale, die)


def write_placement(circuit, coords, path):
    """Export normalized center coordinates as a Bookshelf .pl file in
    original units (lower-left corners); macros and terminals get /FIXED."""
    nl = circuit.netlist
    if nl.names is None:
        raise BookshelfError("netlist has no name table; cannot export .pl")
    centers = circuit.denormalize(coords)
    sizes = nl.sizes * circuit.unit_scale
    ll = centers - sizes / 2.0
    fixed = nl.fixed_mask if nl.fixed_mask is not None else np.zeros(nl.num_objects, bool)
    macro = nl.macro_mask if nl.macro_mask is not None else np.zeros(nl.num_objects, bool)
    with open(path, "w", encoding="utf-8") as f:
        f.write("UCLA pl 1.0\n")
        for i, name in enumerate(nl.names):
            suffix = " /FIXED" if fixed[i] or macro[i] else ""
            f.write(f"{name} {ll[i, 0]:.6f} {ll[i, 1]:.6f} : N{suffix}\n")


def write_bookshelf(circuit, outdir, basename):
    """Write .nodes/.nets/.pl/.aux for round-trip tests and downstream tools."""
    os.makedirs(outdir, exist_ok=True)
    nl = circuit.netlist
    if nl.names is None:
        raise BookshelfError("netlist has no name table; cannot export")
    scale = circuit.unit_scale
    sizes = nl.sizes * scale
    fixed = nl.fixed_mask if nl.fixed_mask is not None else np.zeros(nl.num_objects, bool)

    nodes_path = os.path.join(outdir, basename + ".nodes")
    with open(nodes_path, "w", encoding="utf-8") as f:
        f.write("UCLA nodes 1.0\n")
        f.write(f"NumNodes : {nl.num_objects}\n")
        f.write(f"NumTerminals : {int(fixed.sum())}\n")
        for i, name in enumerate(nl.names):
            flag = " terminal" if fixed[i] else ""
            f.write(f"  {name} {sizes[i, 0]:.6f} {sizes[i, 1]:.6f}{flag}\n")

    nets_path = os.path.join(outdir, basename + ".nets")
    total_pins = 0 if nl.net_ptr is None else int(nl.net_ptr[-1])
    with open(nets_path, "w", encoding="utf-8") as f:
        f.write("UCLA nets 1.0\n")
        f.write(f"NumNets : {nl.num_nets}\n")
        f.write(f"NumPins : {total_pins}\n")
        for k in range(nl.num_nets):
            s, e = int(nl.net_ptr[k]), int(nl.net_ptr[k + 1])
            f.write(f"NetDegree : {e - s} n{k}\n")
            for t in range(s, e):
                o = int(nl.net_pin_owner[t])
                dx, dy = nl.net_pin_offset[t] * scale
                f.write(f"  {nl.names[o]} I : {dx:.6f} {dy:.6f}\n")

    if circuit.placement is not None:
        write_placement(circuit, circuit.placement.coords, os.path.join(outdir, basename + ".pl"))

    with open(os.path.join(outdir, basename + ".aux"), "w", encoding="utf-8") as f:
        f.write(
            f"RowBasedPlacement : {basename}.nodes {basename}.nets "
            f"{basename}.wts {basename}.pl {basename}.scl\n"
        )


def load_partition(path, n):
    """Partition file: one line per object, a cluster id or -1 for objects
    that pass through unclustered (macros/terminals)."""
    ids = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                ids.append(int(line))
            except ValueError as exc:
                raise BookshelfError(f"{path}:{lineno}: bad cluster id {line!r}") from exc
    if len(ids) != n:
        raise BookshelfError(
            f"{path}: {len(ids)} assignments for {n} objects; every movable "
            f"cell needs a cluster id (-1 for macros)"
        )
    return np.asarray(ids, dtype=np.int64)


def apply_clusters(netlist, partition_path, k, coords=None):
    """Aggregate movable standard cells into k cluster objects.

    Each cluster becomes one square object whose area is the total area of
    its member cells, with pins at the cluster center; nets are rewired and
    nets entirely within a single object are removed.  Objects marked -1 in
    the partition (macros, terminals) pass through unchanged.

    Returns (clustered netlist, coords or None) where cluster positions are
    the area-weighted centroids of their members when coords is given.
    """
    n = netlist.num_objects
    part = load_partition(partition_path, n)
    if ((part < -1) | (part >= k)).any():
        bad = int(part[(part < -1) | (part >= k)][0])
        raise BookshelfError(f"cluster id {bad} outside [0, {k})")
    fixed = netlist.fixed_mask if netlist.fixed_mask is not None else np.zeros(n, bool)
    if (fixed & (part >= 0)).any():
        i = int(np.nonzero(fixed & (part >= 0))[0][0])
        raise BookshelfError(f"terminal object {i} assigned to a cluster")

    passthrough = np.nonzero(part < 0)[0]
    new_index = np.full(n, -1, dtype=np.int64)
    for new_i, old_i in enumerate(passthrough):
        new_index[old_i] = new_i
    base = len(passthrough)

    areas = netlist.areas()
    cluster_area = np.zeros(k)
    np.add.at(cluster_area, part[part >= 0], areas[part >= 0])
    used = np.nonzero(cluster_area > 0)[0]
    cluster_slot = np.full(k, -1, dtype=np.int64)
    for slot, c in enumerate(used):
        cluster_slot[c] = base + slot
    clustered = part >= 0
    new_index[clustered] = cluster_slot[part[clustered]]

    sizes = np.empty((base + len(used), 2))
    sizes[:base] = netlist.sizes[passthrough]
    side = np.sqrt(cluster_area[used])
    sizes[base:, 0] = side
    sizes[base:, 1] = side

    names = None
    if netlist.names is not None:
        names = [netlist.names[i] for i in passthrough]
        names += [f"cluster{int(c)}" for c in used]
    new_fixed = np.zeros(base + len(used), dtype=bool)
    new_fixed[:base] = fixed[passthrough]
    new_macro = np.zeros(base + len(used), dtype=bool)
    if netlist.macro_mask is not None:
        new_macro[:base] = netlist.macro_mask[passthrough]
    else:
        new_macro[:base] = ~fixed[passthrough]

    ptr = [0]
    owners = []
    offs = []
    if netlist.net_ptr is not None:
        for j in range(netlist.num_nets):
            s, e = int(netlist.net_ptr[j]), int(netlist.net_ptr[j + 1])
            pins = []
            seen_clusters = set()
            for t in range(s, e):
                o = int(netlist.net_pin_owner[t])
                if part[o] >= 0:
                    c = new_index[o]
                    if c in seen_clusters:
                        continue
                    seen_clusters.add(c)
                    pins.append((c, 0.0, 0.0))
                else:
                    pins.append(
                        (
                            new_index[o],
                            netlist.net_pin_offset[t, 0],
                            netlist.net_pin_offset[t, 1],
                        )
                    )
            if len({p[0] for p in pins}) < 2:
                continue  # net inside a single object: removed
            for p in pins:
                owners.append(p[0])
                offs.append((p[1], p[2]))
            ptr.append(len(owners))

    out = Netlist(
        sizes,
        nets=(
            np.asarray(ptr, dtype=np.int64),
            np.asarray(owners, dtype=np.int64),
            np.asarray(offs, dtype=np.float64).reshape(-1, 2),
        ),
        fixed_mask=new_fixed,
        macro_mask=new_macro,
        names=names,
    )

    new_coords = None
    if coords is not None:
        coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
        new_coords = np.zeros((base + len(used), 2))
        new_coords[:base] = coords[passthrough]
        wsum = np.zeros(k)
        wpos = np.zeros((k, 2))
        np.add.at(wsum, part[clustered], areas[clustered])
        np.add.at(wpos, part[clustered], areas[clustered, None] * coords[clustered])
        new_coords[base:] = wpos[used] / wsum[used, None]
    return out, new_coords
