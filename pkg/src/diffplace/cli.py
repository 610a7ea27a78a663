"""Command-line front end.

Subcommands: gen, train, sample, eval, render, convert, study.  Every run
writes a manifest JSON (flags, seed, version) beside its primary output so
results are reproducible from the recorded invocation.
"""

import argparse
import dataclasses
import json
import sys
import time

import numpy as np

from . import __version__
from . import bookshelf
from . import dataset as ds
from . import ddpm
from . import denoiser as dn
from . import guidance as gd
from . import metrics
from . import render
from . import study
from . import synthgen
from . import train as traincore

PLACEMENT_FORMAT = "diffplace-placement"


def write_manifest(out_path, command, args):
    flags = {k: v for k, v in vars(args).items() if k != "func"}
    manifest = {
        "command": command,
        "version": __version__,
        "flags": flags,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    path = str(out_path) + ".manifest.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, default=str)


def load_circuit(path, index=None):
    """Load a netlist (+ optional placement) from a record JSON or a dataset
    JSONL (with --index)."""
    if str(path).endswith(".jsonl"):
        for i, record in enumerate(ds.read_dataset(path)):
            if i == (index or 0):
                return ds.record_to_netlist(record)
        raise ds.DatasetError(f"{path}: record index {index} out of range")
    with open(path, "r", encoding="utf-8") as f:
        record = json.load(f)
    return ds.record_to_netlist(record)


def load_placement(path):
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get("format") != PLACEMENT_FORMAT:
        raise ValueError(f"{path}: not a {PLACEMENT_FORMAT} file")
    return np.asarray(data["coords"], dtype=np.float64).reshape(-1, 2), data.get(
        "metadata", {}
    )


def save_placement(path, coords, metadata=None):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(
            {
                "format": PLACEMENT_FORMAT,
                "coords": np.asarray(coords).tolist(),
                "metadata": metadata or {},
            },
            f,
        )


def _resolve_params(args):
    if args.params and args.preset:
        raise SystemExit("pass either --params or --preset, not both")
    if args.params:
        return synthgen.load_params(args.params)
    preset = args.preset or "v0"
    if preset not in synthgen.PRESETS:
        raise SystemExit(f"unknown preset {preset!r}; have {list(synthgen.PRESETS)}")
    return synthgen.PRESETS[preset]


def cmd_gen(args):
    params = _resolve_params(args)
    stats = synthgen.generate_dataset(
        params, args.count, args.seed, args.workers, args.out
    )
    write_manifest(args.out, "gen", args)
    print(
        f"wrote {stats['circuits']} circuits to {args.out} "
        f"({stats['circuits_per_second']:.1f}/s); "
        f"mean vertices {stats['vertices']['mean']:.1f}, "
        f"mean edges {stats['edges']['mean']:.1f}"
    )
    return 0


def _model_config(args):
    if args.model in dn.PRESETS:
        cfg = dn.PRESETS[args.model]
    else:
        raise SystemExit(f"unknown model {args.model!r}; have {list(dn.PRESETS)}")
    overrides = {}
    for field in (
        "model_size",
        "blocks",
        "layers_per_block",
        "attgnn_size",
        "resgnn_size",
    ):
        v = getattr(args, field, None)
        if v is not None:
            overrides[field] = v
    if getattr(args, "no_attention", False):
        overrides["use_attention"] = False
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def cmd_train(args):
    model_cfg = _model_config(args)
    tc = traincore.TrainConfig(
        steps=args.steps,
        batch_size=args.batch,
        lr=args.lr,
        lr_decay=args.lr_decay,
        ckpt_interval=args.ckpt_interval,
        seed=args.seed,
        limit=args.limit,
    )

    def progress(step, loss, lr):
        print(f"step {step:>7d}  loss {loss:.4f}  lr {lr:.2e}", flush=True)

    traincore.train(
        args.dataset,
        model_cfg,
        tc,
        args.out,
        resume=args.resume,
        log_path=args.log,
        progress=progress if args.verbose else None,
    )
    write_manifest(args.out, "train", args)
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_sample(args):
    config, params, meta, _ = dn.load_checkpoint(args.ckpt)
    netlist, placement, _ = load_circuit(args.netlist, args.index)
    schedule = ddpm.cosine_schedule(args.timesteps)
    guidance_cfg = None
    if args.guided:
        guidance_cfg = gd.GuidanceConfig(
            w_hpwl=args.w_hpwl,
            inner_steps=args.inner_steps,
            slack=args.slack,
            w_g=args.w_g,
        )
    fixed_coords = None
    if netlist.fixed_mask is not None and netlist.fixed_mask.any():
        if placement is None:
            raise SystemExit("netlist has fixed objects but no placement for them")
        fixed_coords = placement.coords
    snapshot_every = args.snapshot_every if args.trajectory_out else None
    coords, snaps = ddpm.sample(
        netlist,
        params,
        config,
        schedule,
        args.seed,
        guidance_cfg=guidance_cfg,
        fixed_coords=fixed_coords,
        snapshot_every=snapshot_every,
        deterministic=args.deterministic,
    )
    save_placement(
        args.out,
        coords,
        {"ckpt": args.ckpt, "seed": args.seed, "guided": bool(args.guided),
         "model_step": meta.get("step")},
    )
    if args.trajectory_out:
        with open(args.trajectory_out, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "format": "diffplace-trajectory",
                    "netlist": ds.netlist_to_record(netlist),
                    "snapshots": [[label, c.tolist()] for label, c in snaps],
                },
                f,
            )
    write_manifest(args.out, "sample", args)
    print(f"placement written to {args.out}")
    return 0


def cmd_eval(args):
    netlist, placement, _ = load_circuit(args.netlist, args.index)
    if args.placement:
        coords, _ = load_placement(args.placement)
    elif placement is not None:
        coords = placement.coords
    else:
        raise SystemExit("no placement: pass --placement or a record with one")
    report = metrics.evaluate(netlist, coords, grid_n=args.grid)
    out = report.to_dict(include_map=args.rudy_map)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(out, f, indent=2)
        write_manifest(args.out, "eval", args)
    if args.csv:
        import csv as _csv
        import os

        new = not os.path.exists(args.csv)
        with open(args.csv, "a", newline="", encoding="utf-8") as f:
            w = _csv.writer(f)
            if new:
                w.writerow(["netlist", "placement", "hpwl", "legality", "rudy_scalar"])
            w.writerow(
                [args.netlist, args.placement, report.hpwl, report.legality,
                 report.rudy_scalar]
            )
    print(json.dumps({k: v for k, v in out.items() if k != "rudy_map"}, indent=2))
    return 0


def cmd_render(args):
    if args.trajectory:
        with open(args.trajectory, "r", encoding="utf-8") as f:
            data = json.load(f)
        if data.get("format") != "diffplace-trajectory":
            raise SystemExit(f"{args.trajectory}: not a trajectory file")
        netlist = ds.record_to_netlist(data["netlist"])[0]
        snaps = [(label, np.asarray(c)) for label, c in data["snapshots"]]
        svg = render.render_filmstrip(netlist, snaps, size=args.size, draw_edges=args.edges)
    else:
        netlist, placement, _ = load_circuit(args.netlist, args.index)
        if args.placement:
            coords, _ = load_placement(args.placement)
        elif placement is not None:
            coords = placement.coords
        else:
            raise SystemExit("no placement: pass --placement or a record with one")
        svg = render.render_svg(
            netlist, coords, size=args.size, draw_edges=args.edges,
            label=args.label,
        )
    with open(args.out, "w", encoding="utf-8") as f:
        f.write(svg)
    write_manifest(args.out, "render", args)
    print(f"svg written to {args.out}")
    return 0


def cmd_convert(args):
    circuit = bookshelf.parse_bookshelf(args.bookshelf)
    netlist = circuit.netlist
    coords = circuit.placement.coords if circuit.placement is not None else None
    if args.clusters:
        netlist, coords = bookshelf.apply_clusters(
            netlist, args.clusters, args.k, coords
        )
    if args.macro_only:
        keep = np.zeros(netlist.num_objects, dtype=bool)
        if netlist.macro_mask is not None:
            keep |= netlist.macro_mask
        if netlist.fixed_mask is not None:
            keep |= netlist.fixed_mask
        if not keep.any():
            raise SystemExit("macro-only: no macros or terminals identified")
        netlist, coords = _filter_objects(netlist, coords, keep)
    record = ds.netlist_to_record(
        netlist,
        coords,
        metadata={
            "source": str(args.bookshelf),
            "unit_scale": circuit.unit_scale,
            "die": list(circuit.die),
        },
    )
    with open(args.out, "w", encoding="utf-8") as f:
        json.dump(record, f)
    write_manifest(args.out, "convert", args)
    print(
        f"converted {args.bookshelf}: {netlist.num_objects} objects, "
        f"{netlist.num_nets} nets -> {args.out}"
    )
    return 0


def _filter_objects(netlist, coords, keep):
    """Subset a netlist to kept objects, rewiring nets and dropping those with
    fewer than two remaining pins on distinct objects."""
    from .netlist import Netlist

    new_index = np.full(netlist.num_objects, -1, dtype=np.int64)
    new_index[keep] = np.arange(int(keep.sum()))
    ptr = [0]
    owners = []
    offs = []
    if netlist.net_ptr is not None:
        for kk in range(netlist.num_nets):
            s, e = int(netlist.net_ptr[kk]), int(netlist.net_ptr[kk + 1])
            pins = [
                (new_index[netlist.net_pin_owner[t]], *netlist.net_pin_offset[t])
                for t in range(s, e)
                if keep[netlist.net_pin_owner[t]]
            ]
            if len({p[0] for p in pins}) < 2:
                continue
            for p in pins:
                owners.append(p[0])
                offs.append((p[1], p[2]))
            ptr.append(len(owners))
    nl = Netlist(
        netlist.sizes[keep],
        nets=(
            np.asarray(ptr, dtype=np.int64),
            np.asarray(owners, dtype=np.int64),
            np.asarray(offs, dtype=np.float64).reshape(-1, 2),
        ),
        fixed_mask=None if netlist.fixed_mask is None else netlist.fixed_mask[keep],
        macro_mask=None if netlist.macro_mask is None else netlist.macro_mask[keep],
        names=None
        if netlist.names is None
        else [n for n, k in zip(netlist.names, keep) if k],
    )
    return nl, None if coords is None else coords[keep]


def cmd_study(args):
    grid = args.grid.split(",")
    if args.axis != "edge-dist":
        grid = [float(g) for g in grid]
    base = synthgen.load_params(args.params) if args.params else None
    rows = study.run_study(
        args.ckpt,
        args.axis,
        grid,
        args.out,
        base_params=base,
        count=args.count,
        seeds=list(range(args.seeds)),
        guided=args.guided,
    )
    write_manifest(args.out.rstrip("/") + "/study.csv", "study", args)
    for r in rows:
        print(
            f"{args.axis}={r['value']}: legality median {r['legality_median']:.3f}, "
            f"hpwl ratio median {r['hpwl_ratio_median']:.3f}"
        )
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="diffplace",
        description="Macro placement via graph diffusion: generate synthetic "
        "data, train the denoiser, sample and evaluate placements.",
    )
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--params", help="SynthParams TOML/JSON file")
    g.add_argument("--preset", help="parameter preset: v0, v1 or v2")
    g.add_argument("--count", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--workers", type=int, default=1)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train the denoiser on a dataset")
    t.add_argument("--dataset", required=True)
    t.add_argument("--model", default="small", help="small, medium or large")
    t.add_argument("--model-size", type=int, dest="model_size")
    t.add_argument("--blocks", type=int)
    t.add_argument("--layers-per-block", type=int, dest="layers_per_block")
    t.add_argument("--attgnn-size", type=int, dest="attgnn_size")
    t.add_argument("--resgnn-size", type=int, dest="resgnn_size")
    t.add_argument("--no-attention", action="store_true", dest="no_attention")
    t.add_argument("--steps", type=int, required=True)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--lr", type=float, default=3e-4)
    t.add_argument("--lr-decay", default="cosine", choices=("cosine", "constant"))
    t.add_argument("--ckpt-interval", type=int, default=0, dest="ckpt_interval")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--limit", type=int, help="use only the first N circuits")
    t.add_argument("--resume", help="checkpoint to continue from (fine-tuning)")
    t.add_argument("--log", help="CSV loss log path")
    t.add_argument("--out", required=True)
    t.add_argument("--verbose", action="store_true")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="sample a placement for a netlist")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--netlist", required=True, help="record JSON or dataset JSONL")
    s.add_argument("--index", type=int, help="record index within a dataset file")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--timesteps", type=int, default=1000)
    s.add_argument("--guided", action="store_true")
    s.add_argument("--w-hpwl", type=float, default=1e-4, dest="w_hpwl")
    s.add_argument("--inner-steps", type=int, default=10, dest="inner_steps")
    s.add_argument("--slack", type=float, default=1e-4)
    s.add_argument("--w-g", type=float, default=1.0, dest="w_g")
    s.add_argument("--deterministic", action="store_true", help="no injected noise")
    s.add_argument("--trajectory-out", dest="trajectory_out",
                   help="write denoising snapshots JSON for `render --trajectory`")
    s.add_argument("--snapshot-every", type=int, default=200, dest="snapshot_every")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    e = sub.add_parser("eval", help="score a placement (MetricReport JSON)")
    e.add_argument("--netlist", required=True)
    e.add_argument("--index", type=int)
    e.add_argument("--placement")
    e.add_argument("--grid", type=int, default=metrics.DEFAULT_RUDY_GRID)
    e.add_argument("--rudy-map", action="store_true", dest="rudy_map",
                   help="include the full RUDY grid in the JSON")
    e.add_argument("--out")
    e.add_argument("--csv", help="append a row to a batch CSV")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("render", help="render a placement or trajectory SVG")
    r.add_argument("--netlist")
    r.add_argument("--index", type=int)
    r.add_argument("--placement")
    r.add_argument("--trajectory", help="trajectory JSON from `sample --trajectory-out`")
    r.add_argument("--edges", action="store_true")
    r.add_argument("--size", type=int, default=480)
    r.add_argument("--label")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)

    c = sub.add_parser("convert", help="Bookshelf benchmark -> circuit JSON")
    c.add_argument("--bookshelf", required=True, help=".aux file or directory")
    c.add_argument("--clusters", help="partition file (one cluster id per object)")
    c.add_argument("--k", type=int, default=512, help="number of clusters")
    c.add_argument("--macro-only", action="store_true", dest="macro_only")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convert)

    st = sub.add_parser("study", help="generalization sweep over one axis")
    st.add_argument("--ckpt", required=True)
    st.add_argument("--axis", required=True, choices=study.AXES)
    st.add_argument("--grid", required=True, help="comma-separated grid values")
    st.add_argument("--params", help="base SynthParams file (default: v0 preset)")
    st.add_argument("--count", type=int, default=32)
    st.add_argument("--seeds", type=int, default=1)
    st.add_argument("--guided", action="store_true")
    st.add_argument("--out", required=True, help="output directory")
    st.set_defaults(func=cmd_study)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
