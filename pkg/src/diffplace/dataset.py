"""Streaming JSONL dataset format.

Line 1 is a versioned header; every following line is one circuit record.
Numbers are serialized with repr-exact floats, so write -> read round-trips
are value-identical.  Readers reject unknown versions and report the
zero-based record index of any corrupted line.
"""

import json

import numpy as np

from .netlist import Netlist, Placement

FORMAT = "diffplace-dataset"
VERSION = 1


class DatasetError(ValueError):
    pass


def header_line(params=None, extra=None):
    header = {"format": FORMAT, "version": VERSION}
    if params is not None:
        header["params"] = params.to_dict()
    if extra:
        header.update(extra)
    return json.dumps(header) + "\n"


def read_header(path):
    with open(path, "r", encoding="utf-8") as f:
        line = f.readline()
    try:
        header = json.loads(line)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: malformed header line: {exc}") from exc
    if header.get("format") != FORMAT:
        raise DatasetError(f"{path}: not a {FORMAT} file")
    if header.get("version") != VERSION:
        raise DatasetError(
            f"{path}: unsupported dataset version {header.get('version')!r}"
        )
    return header


def read_dataset(path):
    """Yield record dicts; constant memory in the number of circuits."""
    read_header(path)
    with open(path, "r", encoding="utf-8") as f:
        f.readline()
        for idx, line in enumerate(f):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(
                    f"{path}: corrupted record {idx} (zero-based): {exc}"
                ) from exc
            if record.get("partial"):
                raise DatasetError(
                    f"{path}: partial dataset, aborted with: {record.get('error')}"
                )
            yield record


def write_dataset(path, records, params=None):
    """Write an iterable of record dicts; returns the record count."""
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        f.write(header_line(params))
        for record in records:
            f.write(json.dumps(record))
            f.write("\n")
            count += 1
    return count


def netlist_to_record(netlist, placement=None, circuit_id=0, metadata=None):
    record = {
        "circuit_id": int(circuit_id),
        "objects": netlist.sizes.tolist(),
        "edges": np.concatenate(
            [netlist.edges.astype(np.float64), netlist.edge_attr], axis=1
        ).tolist(),
    }
    if netlist.net_ptr is not None:
        nets = []
        for k in range(netlist.num_nets):
            s, e = int(netlist.net_ptr[k]), int(netlist.net_ptr[k + 1])
            nets.append(
                [
                    [int(netlist.net_pin_owner[i])]
                    + netlist.net_pin_offset[i].tolist()
                    for i in range(s, e)
                ]
            )
        record["nets"] = nets
    if netlist.fixed_mask is not None:
        record["fixed"] = netlist.fixed_mask.astype(int).tolist()
    if netlist.macro_mask is not None:
        record["macro"] = netlist.macro_mask.astype(int).tolist()
    if netlist.names is not None:
        record["names"] = netlist.names
    if placement is not None:
        coords = placement.coords if isinstance(placement, Placement) else placement
        record["placement"] = np.asarray(coords).tolist()
    record["metadata"] = metadata or {}
    return record


def record_to_netlist(record):
    """Build (Netlist, Placement or None, metadata) from a record dict."""
    sizes = np.asarray(record["objects"], dtype=np.float64).reshape(-1, 2)
    edges6 = np.asarray(record.get("edges", []), dtype=np.float64).reshape(-1, 6)
    nets = None
    if "nets" in record:
        ptr = [0]
        owners = []
        offs = []
        for net in record["nets"]:
            for owner, dx, dy in net:
                owners.append(int(owner))
                offs.append((dx, dy))
            ptr.append(len(owners))
        nets = (
            np.asarray(ptr, dtype=np.int64),
            np.asarray(owners, dtype=np.int64),
            np.asarray(offs, dtype=np.float64).reshape(-1, 2),
        )
    fixed = record.get("fixed")
    macro = record.get("macro")
    netlist = Netlist(
        sizes,
        edges6[:, :2].astype(np.int64),
        edges6[:, 2:],
        nets=nets,
        fixed_mask=None if fixed is None else np.asarray(fixed, dtype=bool),
        macro_mask=None if macro is None else np.asarray(macro, dtype=bool),
        names=record.get("names"),
    )
    placement = None
    if record.get("placement") is not None:
        placement = Placement(np.asarray(record["placement"], dtype=np.float64))
    return netlist, placement, record.get("metadata", {})
