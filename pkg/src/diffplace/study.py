"""Generalization-study harness: evaluate one trained checkpoint on datasets
generated while sweeping a single generation axis, reporting legality and
HPWL-ratio curves as CSV plus SVG line charts.
"""

import csv
import json
import math
import os
from dataclasses import replace

import numpy as np

from . import ddpm
from . import denoiser as dn
from . import guidance as gd
from . import metrics
from . import render
from . import synthgen
from .netlist import concat_netlists

AXES = ("edges", "vertices", "scale", "edge-dist")


def axis_params(base, axis, value):
    """SynthParams for one grid point of a study axis.

    edges: multiplies gamma (edge count scales with it); vertices: multiplies
    the expected object count by scaling the size distribution; scale: sets a
    fixed decay length s; edge-dist: switches the p(l) family.
    """
    if axis == "edges":
        f = float(value)
        if base.gamma_coef is not None:
            return replace(base, gamma_coef=base.gamma_coef * f)
        return replace(base, gamma=base.gamma * f)
    if axis == "vertices":
        f = float(value)
        # object count scales roughly with 1/size_scale^2
        return replace(
            base,
            size_scale=base.size_scale / math.sqrt(f),
            size_max=base.size_max,
            size_min=min(base.size_min, base.size_scale / math.sqrt(f)),
        )
    if axis == "scale":
        return replace(base, scale_s=float(value))
    if axis == "edge-dist":
        if value not in synthgen.EDGE_DIST_KINDS:
            raise ValueError(f"unknown edge distribution {value!r}")
        return replace(base, edge_dist_kind=str(value))
    raise ValueError(f"unknown study axis {axis!r}; choose from {AXES}")


def evaluate_point(
    params,
    config,
    schedule,
    gen_params,
    count,
    seed,
    guided=False,
    guidance_cfg=None,
):
    """Sample placements for `count` fresh circuits and score them."""
    circuits = []
    for i in range(count):
        nl, pl, _, _ = synthgen.generate_circuit(gen_params, [int(seed), 7000 + i])
        circuits.append((nl, pl.coords))
    merged, group_ptr = concat_netlists([nl for nl, _ in circuits])
    ctx = dn.build_context(merged, group_ptr)
    eps_fn = ddpm.make_eps_fn(params, config, ctx)
    cfg = None
    if guided:
        cfg = guidance_cfg or gd.GuidanceConfig()
    coords, _ = ddpm.sample_batch(merged, group_ptr, eps_fn, schedule, seed, cfg)

    legality = []
    ratio = []
    for g, (nl, ref) in enumerate(circuits):
        s, e = group_ptr[g], group_ptr[g + 1]
        got = coords[s:e]
        legality.append(metrics.legality_score(nl, got))
        ref_hpwl = metrics.hpwl(nl, ref)
        if ref_hpwl > 0:
            ratio.append(metrics.hpwl_ratio(metrics.hpwl(nl, got), ref_hpwl))
    return np.asarray(legality), np.asarray(ratio)


def run_study(
    ckpt_path,
    axis,
    grid,
    out_dir,
    base_params=None,
    count=32,
    seeds=(0,),
    guided=False,
):
    """Sweep one axis; writes study.csv and legality/hpwl charts to out_dir.

    Returns the list of result row dicts."""
    if axis not in AXES:
        raise ValueError(f"unknown study axis {axis!r}; choose from {AXES}")
    config, params, meta, _ = dn.load_checkpoint(ckpt_path)
    schedule = ddpm.cosine_schedule(1000)
    base = base_params or synthgen.PRESETS["v0"]
    os.makedirs(out_dir, exist_ok=True)

    rows = []
    for value in grid:
        gen_params = axis_params(base, axis, value)
        leg_all = []
        ratio_all = []
        for seed in seeds:
            leg, ratio = evaluate_point(
                params, config, schedule, gen_params, count, int(seed), guided
            )
            leg_all.append(leg)
            ratio_all.append(ratio)
        leg = np.concatenate(leg_all)
        ratio = np.concatenate(ratio_all) if ratio_all else np.asarray([])
        rows.append(
            {
                "axis": axis,
                "value": value,
                "circuits": int(leg.size),
                "legality_median": float(np.median(leg)),
                "legality_mean": float(leg.mean()),
                "hpwl_ratio_median": float(np.median(ratio)) if ratio.size else float("nan"),
                "hpwl_ratio_mean": float(ratio.mean()) if ratio.size else float("nan"),
            }
        )

    csv_path = os.path.join(out_dir, "study.csv")
    with open(csv_path, "w", newline="", encoding="utf-8") as f:
        w = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        w.writeheader()
        w.writerows(rows)

    numeric = axis != "edge-dist"
    xs = [float(r["value"]) if numeric else i for i, r in enumerate(rows)]
    leg_chart = render.render_line_chart(
        {"median legality": (xs, [r["legality_median"] for r in rows])},
        xlabel=axis,
        ylabel="legality",
    )
    with open(os.path.join(out_dir, "legality.svg"), "w", encoding="utf-8") as f:
        f.write(leg_chart)
    ratio_chart = render.render_line_chart(
        {"median HPWL ratio": (xs, [r["hpwl_ratio_median"] for r in rows])},
        xlabel=axis,
        ylabel="hpwl ratio",
    )
    with open(os.path.join(out_dir, "hpwl_ratio.svg"), "w", encoding="utf-8") as f:
        f.write(ratio_chart)
    with open(os.path.join(out_dir, "study.json"), "w", encoding="utf-8") as f:
        json.dump({"checkpoint_meta": meta, "rows": rows}, f, indent=2)
    return rows
