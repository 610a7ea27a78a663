"""Synthetic circuit generation by inverting the placement problem: draw a
legal placement first, then sample a netlist for which it is near-optimal.

Objects are rejection-placed until a target canvas density is reached, pin
counts follow a power law matched to object area rank, and pin pairs become
edges with a probability that decays with their L1 distance.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .netlist import Netlist, Placement

EDGE_DIST_KINDS = ("exponential", "sigmoid", "linear")


@dataclass(frozen=True)
class SynthParams:
    stop_density_low: float = 0.75
    stop_density_high: float = 0.9
    aspect_low: float = 0.25
    aspect_high: float = 1.0
    size_scale: float = 0.08  # exponential scale of the area-defining length
    size_min: float = 0.02
    size_max: float = 1.0
    pin_exponent: float = 2.0
    pin_min: int = 1
    pin_max: int = 96
    edge_dist_kind: str = "exponential"
    scale_s: object = 0.2  # float, or (low, high) sampled log-uniformly
    gamma: float | None = 0.21  # fixed multiplier, or None when coef/power set
    gamma_coef: float | None = None  # gamma(s) = gamma_coef * s**gamma_power
    gamma_power: float | None = None
    p_max: float = 0.9
    placement_retry_limit: int = 100
    global_attempt_cap: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.stop_density_low <= self.stop_density_high < 1.0):
            raise ValueError("stop density bounds must satisfy 0 < low <= high < 1")
        if not (0.0 < self.size_min <= self.size_max):
            raise ValueError("size bounds must satisfy 0 < min <= max")
        if not (0.0 < self.p_max <= 1.0):
            raise ValueError("p_max must be in (0, 1]")
        if self.edge_dist_kind not in EDGE_DIST_KINDS:
            raise ValueError(f"edge_dist_kind must be one of {EDGE_DIST_KINDS}")
        if not (1 <= self.pin_min <= self.pin_max):
            raise ValueError("pin bounds must satisfy 1 <= min <= max")
        if isinstance(self.scale_s, (tuple, list)):
            lo, hi = self.scale_s
            if not (0.0 < lo <= hi):
                raise ValueError("scale bounds must be positive with low <= high")
        elif float(self.scale_s) <= 0.0:
            raise ValueError("scale_s must be positive")
        if self.gamma is None and (self.gamma_coef is None or self.gamma_power is None):
            raise ValueError("either gamma or gamma_coef+gamma_power is required")

    def draw_scale(self, rng):
        if isinstance(self.scale_s, (tuple, list)):
            lo, hi = self.scale_s
            return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))
        return float(self.scale_s)

    def gamma_of(self, s):
        if self.gamma_coef is not None:
            return float(self.gamma_coef) * s ** float(self.gamma_power)
        return float(self.gamma)

    def to_dict(self):
        d = {
            "stop_density_low": self.stop_density_low,
            "stop_density_high": self.stop_density_high,
            "aspect_low": self.aspect_low,
            "aspect_high": self.aspect_high,
            "size_scale": self.size_scale,
            "size_min": self.size_min,
            "size_max": self.size_max,
            "pin_exponent": self.pin_exponent,
            "pin_min": self.pin_min,
            "pin_max": self.pin_max,
            "edge_dist_kind": self.edge_dist_kind,
            "scale_s": list(self.scale_s)
            if isinstance(self.scale_s, (tuple, list))
            else self.scale_s,
            "p_max": self.p_max,
            "placement_retry_limit": self.placement_retry_limit,
            "global_attempt_cap": self.global_attempt_cap,
        }
        if self.gamma_coef is not None:
            d["gamma_coef"] = self.gamma_coef
            d["gamma_power"] = self.gamma_power
        else:
            d["gamma"] = self.gamma
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "scale_s" in d and isinstance(d["scale_s"], list):
            d["scale_s"] = tuple(d["scale_s"])
        if "gamma_coef" in d:
            d.setdefault("gamma", None)
        return cls(**d)


PRESETS = {
    "v0": SynthParams(),
    "v1": SynthParams(
        scale_s=(0.05, 1.6), gamma=None, gamma_coef=0.212, gamma_power=-1.42
    ),
    "v2": SynthParams(
        size_scale=0.04,
        size_min=0.01,
        size_max=0.5,
        scale_s=(0.025, 0.8),
        gamma=None,
        gamma_coef=0.00792,
        gamma_power=-1.42,
    ),
}


def load_params(path):
    """Read SynthParams from a TOML or JSON file (keys as in to_dict)."""
    import json

    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        try:
            import tomllib as toml
        except ImportError:
            import tomli as toml
        data = toml.loads(text.decode("utf-8"))
    else:
        data = json.loads(text.decode("utf-8"))
    return SynthParams.from_dict(data)


def edge_probability(l, params, s=None):
    """Distance-dependent edge acceptance probability, clamped to [0, p_max]."""
    if s is None:
        if isinstance(params.scale_s, (tuple, list)):
            raise ValueError("params draw s per circuit; pass s explicitly")
        s = float(params.scale_s)
    g = params.gamma_of(s)
    l = np.asarray(l, dtype=np.float64)
    kind = params.edge_dist_kind
    if kind == "exponential":
        p = g * np.exp(-l / s)
    elif kind == "sigmoid":
        p = g / (1.0 + np.exp(-(l - s)))
    else:  # linear
        p = g * np.maximum((s - l) / s, 0.0)
    return np.minimum(np.maximum(p, 0.0), params.p_max)


def sample_objects(params, rng, density=None):
    """Draw object sizes until the target density, then rejection-place them
    largest first.

    Sizes come from the clipped exponential with an area-preserving aspect
    (area = length^2), so the object count is set by the size draws alone.
    Placing in decreasing area order lets small objects fill the gaps, which
    is what makes 75-90% fill reachable by uniform rejection sampling.  An
    object that exhausts its retry budget is halved and retried (warning
    flagged); the result is always overlap-free and in bounds.
    """
    if density is None:
        density = rng.uniform(params.stop_density_low, params.stop_density_high)
    target = density * 4.0
    sizes = []
    total = 0.0
    while total < target:
        length = min(max(rng.exponential(params.size_scale), params.size_min), params.size_max)
        aspect = rng.uniform(params.aspect_low, params.aspect_high)
        w = length / math.sqrt(aspect)
        h = length * math.sqrt(aspect)
        if rng.random() < 0.5:
            w, h = h, w
        sizes.append((w, h))
        total += w * h
    sizes = np.asarray(sizes, dtype=np.float64).reshape(-1, 2)
    n = sizes.shape[0]

    order = np.argsort(-(sizes[:, 0] * sizes[:, 1]), kind="stable")
    coords = np.zeros((n, 2))
    warning = False
    shrunk = 0
    attempts = 0
    for rank, i in enumerate(order):
        w, h = sizes[i]
        placed = False
        while not placed:
            attempts += 1
            if attempts > params.global_attempt_cap:
                warning = True
                break
            for _ in range(params.placement_retry_limit):
                cx = rng.uniform(-1.0 + w / 2.0, 1.0 - w / 2.0)
                cy = rng.uniform(-1.0 + h / 2.0, 1.0 - h / 2.0)
                if rank:
                    prev = order[:rank]
                    ox = np.abs(cx - coords[prev, 0]) < (w + sizes[prev, 0]) / 2.0
                    oy = np.abs(cy - coords[prev, 1]) < (h + sizes[prev, 1]) / 2.0
                    if (ox & oy).any():
                        continue
                placed = True
                break
            if not placed:
                # retry budget exhausted: shrink this object and try again
                shrunk += 1
                w, h = w / 2.0, h / 2.0
                sizes[i] = (w, h)
        if not placed:
            # global cap hit: drop the remaining objects, keep the partial circuit
            keep = np.ones(n, dtype=bool)
            keep[order[rank:]] = False
            sizes = np.ascontiguousarray(sizes[keep])
            coords = np.ascontiguousarray(coords[keep])
            break
        coords[i] = (cx, cy)
    return (
        sizes,
        coords,
        {
            "stop_density": float(density),
            "warning": warning,
            "attempts": attempts,
            "shrunk_objects": shrunk,
        },
    )


def _perimeter_offsets(w, h, u):
    """Map uniform draws on [0, perimeter) to boundary offsets from center."""
    per = 2.0 * (w + h)
    u = np.asarray(u) * per
    dx = np.empty_like(u)
    dy = np.empty_like(u)
    # sides in order: bottom, right, top, left
    b0, b1, b2 = w, w + h, 2 * w + h
    on0 = u < b0
    on1 = (u >= b0) & (u < b1)
    on2 = (u >= b1) & (u < b2)
    on3 = u >= b2
    dx[on0] = u[on0] - w / 2.0
    dy[on0] = -h / 2.0
    dx[on1] = w / 2.0
    dy[on1] = (u[on1] - b0) - h / 2.0
    dx[on2] = w / 2.0 - (u[on2] - b1)
    dy[on2] = h / 2.0
    dx[on3] = -w / 2.0
    dy[on3] = h / 2.0 - (u[on3] - b2)
    return dx, dy


def sample_pins(sizes, params, rng):
    """Per-object pin counts from a discrete power law, matched to object
    area rank (larger objects get the larger draws), with offsets uniform on
    the boundary perimeter.  Returns (pin_owner, pin_offset)."""
    n = sizes.shape[0]
    if n == 0:
        raise ValueError("sample_pins needs at least one object")
    ks = np.arange(params.pin_min, params.pin_max + 1, dtype=np.float64)
    weights = ks ** (-params.pin_exponent)
    weights /= weights.sum()
    draws = rng.choice(ks.astype(np.int64), size=n, p=weights)
    # largest draw to largest area
    area_order = np.argsort(-(sizes[:, 0] * sizes[:, 1]), kind="stable")
    counts = np.empty(n, dtype=np.int64)
    counts[area_order] = np.sort(draws)[::-1]

    owners = np.repeat(np.arange(n, dtype=np.int64), counts)
    offs = np.empty((owners.shape[0], 2))
    pos = 0
    for i in range(n):
        k = counts[i]
        u = rng.random(k)
        dx, dy = _perimeter_offsets(sizes[i, 0], sizes[i, 1], u)
        offs[pos : pos + k, 0] = dx
        offs[pos : pos + k, 1] = dy
        pos += k
    return owners, offs


def sample_edges(sizes, coords, pin_owner, pin_off, params, rng, s=None):
    """Bernoulli edge draws over all cross-object pin pairs.

    The probability depends on the L1 distance between the absolute pin
    positions.  Returns (edges (m,2), edge_attr (m,4))."""
    if s is None:
        s = float(params.scale_s)
    p = pin_owner.shape[0]
    pos = coords[pin_owner] + pin_off
    iu, ju = np.triu_indices(p, k=1)
    cross = pin_owner[iu] != pin_owner[ju]
    iu, ju = iu[cross], ju[cross]
    l1 = np.abs(pos[iu, 0] - pos[ju, 0]) + np.abs(pos[iu, 1] - pos[ju, 1])
    prob = edge_probability(l1, params, s)
    accept = rng.random(iu.shape[0]) < prob
    iu, ju = iu[accept], ju[accept]
    edges = np.stack([pin_owner[iu], pin_owner[ju]], axis=1).astype(np.int64)
    attr = np.concatenate([pin_off[iu], pin_off[ju]], axis=1)
    return edges, attr


def generate_circuit(params, seed):
    """Deterministic (netlist, placement, metadata) for one seed.

    Draw order: scale s, stop density, objects, pins, edges."""
    rng = np.random.default_rng(seed)
    s = params.draw_scale(rng)
    sizes, coords, info = sample_objects(params, rng)
    owners, offs = sample_pins(sizes, params, rng)
    edges, attr = sample_edges(sizes, coords, owners, offs, params, rng, s)
    netlist = Netlist(sizes, edges, attr)
    meta = {
        "scale_s": s,
        "gamma": params.gamma_of(s),
        "stop_density": info["stop_density"],
        "warning": info["warning"],
        "shrunk_objects": info["shrunk_objects"],
        "num_objects": int(sizes.shape[0]),
        "num_pins": int(owners.shape[0]),
        "num_edges": int(edges.shape[0]),
    }
    return netlist, Placement(coords), (owners, offs), meta


def circuit_record(params, root_seed, index):
    """Full dataset record dict for circuit `index` under `root_seed`."""
    netlist, placement, (owners, offs), meta = generate_circuit(
        params, [int(root_seed), int(index)]
    )
    meta["seed"] = [int(root_seed), int(index)]
    return {
        "circuit_id": int(index),
        "objects": netlist.sizes.tolist(),
        "pins": np.concatenate([owners[:, None].astype(np.float64), offs], axis=1).tolist(),
        "edges": np.concatenate(
            [netlist.edges.astype(np.float64), netlist.edge_attr], axis=1
        ).tolist(),
        "placement": placement.coords.tolist(),
        "metadata": meta,
    }


def _record_worker(args):
    params, root_seed, index = args
    import json

    return json.dumps(circuit_record(params, root_seed, index))


def generate_dataset(params, count, seed, workers, sink_path, progress=None):
    """Generate `count` circuits to a JSONL sink; order and content are
    independent of the worker count (each circuit is seeded by its index).

    Returns the stats report dict (also written next to the sink)."""
    import json
    import time

    from . import dataset

    t0 = time.perf_counter()
    try:
        with open(sink_path, "w", encoding="utf-8") as f:
            f.write(dataset.header_line(params))
            if workers <= 1:
                for i in range(count):
                    f.write(_record_worker((params, seed, i)))
                    f.write("\n")
                    if progress:
                        progress(i + 1)
            else:
                from concurrent.futures import ProcessPoolExecutor

                jobs = ((params, seed, i) for i in range(count))
                with ProcessPoolExecutor(max_workers=workers) as pool:
                    done = 0
                    for line in pool.map(_record_worker, jobs, chunksize=8):
                        f.write(line)
                        f.write("\n")
                        done += 1
                        if progress:
                            progress(done)
    except Exception as exc:
        try:
            with open(sink_path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"partial": True, "error": str(exc)}) + "\n")
        except OSError:
            pass
        raise
    elapsed = time.perf_counter() - t0
    stats = dataset_stats(sink_path)
    stats["generation_seconds"] = elapsed
    stats["circuits_per_second"] = count / elapsed if elapsed > 0 else float("inf")
    with open(str(sink_path) + ".stats.json", "w", encoding="utf-8") as f:
        json.dump(stats, f, indent=2)
    return stats


def dataset_stats(path, bins=50, l_max=2.0):
    """Aggregate statistics over a dataset file.

    Recomputes cross-object pin-pair distances per record, so the edge-length
    acceptance rate per distance bin (and the implied decay scale) can be
    estimated from the file alone."""
    from . import dataset

    edges_hist = np.zeros(bins)
    pairs_hist = np.zeros(bins)
    width = l_max / bins
    nv, ne, npins = [], [], []
    legal = 0
    total = 0
    for record in dataset.read_dataset(path):
        total += 1
        objs = np.asarray(record["objects"], dtype=np.float64).reshape(-1, 2)
        pins = np.asarray(record["pins"], dtype=np.float64).reshape(-1, 3)
        edges = np.asarray(record["edges"], dtype=np.float64).reshape(-1, 6)
        coords = np.asarray(record["placement"], dtype=np.float64).reshape(-1, 2)
        nv.append(objs.shape[0])
        ne.append(edges.shape[0])
        npins.append(pins.shape[0])

        owner = pins[:, 0].astype(np.int64)
        pos = coords[owner] + pins[:, 1:]
        iu, ju = np.triu_indices(pos.shape[0], k=1)
        cross = owner[iu] != owner[ju]
        l1 = np.abs(pos[iu[cross], 0] - pos[ju[cross], 0]) + np.abs(
            pos[iu[cross], 1] - pos[ju[cross], 1]
        )
        pairs_hist += np.histogram(l1, bins=bins, range=(0.0, l_max))[0]

        esrc = coords[edges[:, 0].astype(np.int64)] + edges[:, 2:4]
        edst = coords[edges[:, 1].astype(np.int64)] + edges[:, 4:6]
        el = np.abs(esrc[:, 0] - edst[:, 0]) + np.abs(esrc[:, 1] - edst[:, 1])
        edges_hist += np.histogram(el, bins=bins, range=(0.0, l_max))[0]

        from . import metrics

        nl, pl, _ = dataset.record_to_netlist(record)
        if metrics.legality_score(nl, pl) == 1.0:
            legal += 1

    def summary(xs):
        xs = np.asarray(xs, dtype=np.float64)
        if xs.size == 0:
            return {"mean": 0.0, "std": 0.0, "min": 0.0, "max": 0.0}
        return {
            "mean": float(xs.mean()),
            "std": float(xs.std()),
            "min": float(xs.min()),
            "max": float(xs.max()),
        }

    centers = (np.arange(bins) + 0.5) * width
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(pairs_hist > 0, edges_hist / np.maximum(pairs_hist, 1), np.nan)
    return {
        "circuits": total,
        "vertices": summary(nv),
        "edges": summary(ne),
        "pins": summary(npins),
        "fully_legal": legal,
        "bin_centers": centers.tolist(),
        "pair_counts": pairs_hist.tolist(),
        "edge_counts": edges_hist.tolist(),
        "acceptance_rate": rate.tolist(),
    }


def fit_acceptance_slope(stats, min_edges=30):
    """Weighted straight-line fit of log acceptance rate vs distance-bin
    center; for exponential edge kinds the slope estimates -1/s."""
    centers = np.asarray(stats["bin_centers"])
    edges = np.asarray(stats["edge_counts"])
    pairs = np.asarray(stats["pair_counts"])
    ok = (edges >= min_edges) & (pairs > 0)
    if ok.sum() < 3:
        raise ValueError("not enough populated bins for a slope fit")
    x = centers[ok]
    y = np.log(edges[ok] / pairs[ok])
    w = edges[ok]
    wm = lambda a: np.sum(w * a) / np.sum(w)
    xb, yb = wm(x), wm(y)
    slope = np.sum(w * (x - xb) * (y - yb)) / np.sum(w * (x - xb) ** 2)
    return float(slope), float(yb - slope * xb)
