"""Noise-prediction network over netlist graphs.

Interleaved per-block structure: a stack of graph-attention convolutions
(edge-feature-aware, GATv2-style scoring), a residual MLP, masked global
self-attention, and a second residual MLP; every sublayer is pre-normalized
with a residual connection.  Inputs are the noisy coordinates plus sinusoidal
2D encodings and object sizes; the integer timestep enters once, added to the
trunk after the input projection.
"""

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DenoiserConfig:
    model_size: int = 128
    blocks: int = 2
    layers_per_block: int = 2
    attgnn_size: int = 32  # total width of the self-attention sublayer
    resgnn_size: int = 256  # width of the graph-conv attention space
    mlp_factor: int = 4
    mlp_layers: int = 2
    heads: int = 4
    t_enc_dim: int = 32
    xy_enc_dim: int = 32
    use_attention: bool = True  # ablation switch

    def __post_init__(self):
        for name in ("model_size", "blocks", "layers_per_block", "attgnn_size",
                     "resgnn_size", "mlp_factor", "mlp_layers", "heads",
                     "t_enc_dim", "xy_enc_dim"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.xy_enc_dim % 4:
            raise ConfigError("xy_enc_dim must be divisible by 4")
        if self.attgnn_size % self.heads:
            raise ConfigError("attgnn_size must be divisible by heads")
        if self.resgnn_size % self.heads:
            raise ConfigError("resgnn_size must be divisible by heads")
        if self.mlp_layers != 2:
            raise ConfigError("only 2-layer MLP blocks are supported")


PRESETS = {
    "small": DenoiserConfig(model_size=64, blocks=2, attgnn_size=32, resgnn_size=64),
    "medium": DenoiserConfig(model_size=128, blocks=2, attgnn_size=32, resgnn_size=256),
    "large": DenoiserConfig(model_size=256, blocks=3, attgnn_size=256, resgnn_size=256),
}


def sinusoidal_xy_encoding(coords, dim):
    """Per-node 2D position encoding: the raw (x, y) followed by, per axis,
    dim/4 (sin, cos) pairs at wavelengths 2.0 / 2^k for k = 0..dim/4-1."""
    if dim % 4:
        raise ConfigError("xy encoding dim must be divisible by 4")
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    npairs = dim // 4
    freqs = np.pi * (2.0 ** np.arange(npairs))  # 2*pi / wavelength
    parts = [coords]
    for axis in (0, 1):
        phase = coords[:, axis : axis + 1] * freqs
        parts.append(np.sin(phase))
        parts.append(np.cos(phase))
    return np.concatenate(parts, axis=1)


def timestep_encoding(t, dim):
    """Sinusoidal encoding of integer timesteps (pairs at geometric periods)."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    half = dim // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / half)
    phase = t * freqs
    return np.concatenate([np.sin(phase), np.cos(phase)], axis=1)


@dataclass
class GraphContext:
    """Precomputed per-batch graph structure for the denoiser forward pass."""

    sizes: np.ndarray  # (n, 2)
    edge_src: np.ndarray  # (E,) directed, includes reversed edges + self loops
    edge_dst: np.ndarray
    edge_attr: np.ndarray  # (E, 4) src/dst pin offsets per directed edge
    attn_mask: np.ndarray  # (n, n) additive, block-diagonal by circuit
    group_ptr: np.ndarray
    fixed_mask: np.ndarray  # (n,) bool

    @property
    def num_nodes(self):
        return self.sizes.shape[0]


def build_context(netlist, group_ptr=None):
    n = netlist.num_objects
    if group_ptr is None:
        group_ptr = np.asarray([0, n], dtype=np.int64)
    e = netlist.edges
    a = netlist.edge_attr
    # both directions per undirected edge, plus a self loop per node so
    # isolated nodes still receive their own message
    src = np.concatenate([e[:, 0], e[:, 1], np.arange(n, dtype=np.int64)])
    dst = np.concatenate([e[:, 1], e[:, 0], np.arange(n, dtype=np.int64)])
    rev = np.concatenate([a[:, 2:], a[:, :2]], axis=1)
    attr = np.concatenate([a, rev, np.zeros((n, 4))], axis=0)

    circ_id = np.repeat(np.arange(group_ptr.shape[0] - 1), np.diff(group_ptr))
    mask = np.where(circ_id[:, None] == circ_id[None, :], 0.0, -1e30)
    fixed = netlist.fixed_mask
    if fixed is None:
        fixed = np.zeros(n, dtype=bool)
    return GraphContext(
        sizes=np.asarray(netlist.sizes, dtype=np.float64),
        edge_src=np.ascontiguousarray(src, dtype=np.int64),
        edge_dst=np.ascontiguousarray(dst, dtype=np.int64),
        edge_attr=np.ascontiguousarray(attr, dtype=np.float64),
        attn_mask=mask,
        group_ptr=np.asarray(group_ptr, dtype=np.int64),
        fixed_mask=fixed,
    )


def _normal(rng, shape, std):
    return rng.normal(0.0, std, size=shape)


def init_params(config, seed):
    """Variance-scaled initialization; the output head starts at zero so the
    initial prediction is zero."""
    rng = np.random.default_rng([int(seed), 0x6E49])
    c = config
    d = c.model_size
    p = {}

    def lin(name, fan_in, fan_out, zero=False):
        std = 0.0 if zero else 1.0 / np.sqrt(fan_in)
        p[f"{name}.w"] = ad.Tensor(_normal(rng, (fan_in, fan_out), std) if not zero
                                   else np.zeros((fan_in, fan_out)), requires_grad=True)
        p[f"{name}.b"] = ad.Tensor(np.zeros(fan_out), requires_grad=True)

    def norm(name, width):
        p[f"{name}.g"] = ad.Tensor(np.ones(width), requires_grad=True)
        p[f"{name}.o"] = ad.Tensor(np.zeros(width), requires_grad=True)

    in_dim = 2 + (c.xy_enc_dim + 2) + 2  # coords + xy encoding (incl. raw) + sizes
    lin("input", in_dim, d)
    lin("tproj1", c.t_enc_dim, d)
    lin("tproj2", d, d)

    r = c.resgnn_size
    for b in range(c.blocks):
        norm(f"blk{b}.gnn.ln", d)
        for l in range(c.layers_per_block):
            g = f"blk{b}.gnn{l}"
            lin(f"{g}.src", d, r)
            lin(f"{g}.dst", d, r)
            p.pop(f"{g}.dst.b")  # one shared score bias (on .src)
            lin(f"{g}.edge1", 4, d)
            lin(f"{g}.edge2", d, r)
            p[f"{g}.att"] = ad.Tensor(
                _normal(rng, (r // c.heads, c.heads), 1.0 / np.sqrt(r // c.heads)),
                requires_grad=True,
            )
            lin(f"{g}.val", d, r)
            lin(f"{g}.out", r, d)
        norm(f"blk{b}.mlp1.ln", d)
        lin(f"blk{b}.mlp1.fc1", d, d * c.mlp_factor)
        lin(f"blk{b}.mlp1.fc2", d * c.mlp_factor, d)
        if c.use_attention:
            a = c.attgnn_size
            norm(f"blk{b}.att.ln", d)
            lin(f"blk{b}.att.q", d, a)
            lin(f"blk{b}.att.k", d, a)
            lin(f"blk{b}.att.v", d, a)
            lin(f"blk{b}.att.out", a, d)
        norm(f"blk{b}.mlp2.ln", d)
        lin(f"blk{b}.mlp2.fc1", d, d * c.mlp_factor)
        lin(f"blk{b}.mlp2.fc2", d * c.mlp_factor, d)
    norm("final.ln", d)
    lin("head", d, 2, zero=True)
    return p


def param_count(params):
    return sum(p.values.size for p in params.values())


def _linear(p, name, x):
    return ad.add(ad.matmul(x, p[f"{name}.w"]), p[f"{name}.b"])


def _gat_layer(p, name, h, ctx, heads):
    """One graph-attention convolution with edge features in the scores."""
    n = ctx.num_nodes
    hs = ad.gather(h, ctx.edge_src)
    hd = ad.gather(h, ctx.edge_dst)
    escore = ad.add(ad.matmul(hs, p[f"{name}.src.w"]), p[f"{name}.src.b"])
    escore = ad.add(escore, ad.matmul(hd, p[f"{name}.dst.w"]))
    eattr = ad.Tensor(ctx.edge_attr)
    emb = ad.gelu(_linear(p, f"{name}.edge1", eattr))
    escore = ad.add(escore, _linear(p, f"{name}.edge2", emb))
    z = ad.leaky_relu(escore, 0.2)
    vals = _linear(p, f"{name}.val", hs)

    r = z.shape[1]
    dh = r // heads
    att = p[f"{name}.att"]
    outs = []
    for hd_i in range(heads):
        z_h = ad.slice_cols(z, hd_i * dh, (hd_i + 1) * dh)
        logit = ad.matmul(z_h, ad.slice_cols(att, hd_i, hd_i + 1))  # (E, 1)
        m = ad.segment_max(logit, ctx.edge_dst, n)
        shifted = ad.sub(logit, ad.gather(m, ctx.edge_dst))
        ex = ad.exp(shifted)
        denom = ad.gather(ad.segment_sum(ex, ctx.edge_dst, n), ctx.edge_dst)
        alpha = ad.div(ex, denom)
        v_h = ad.slice_cols(vals, hd_i * dh, (hd_i + 1) * dh)
        outs.append(ad.segment_sum(ad.mul(v_h, alpha), ctx.edge_dst, n))
    agg = ad.concat(outs, axis=1)
    return _linear(p, f"{name}.out", agg)


def _attention(p, name, h, ctx, heads, width):
    q = _linear(p, f"{name}.q", h)
    k = _linear(p, f"{name}.k", h)
    v = _linear(p, f"{name}.v", h)
    dh = width // heads
    mask = ad.Tensor(ctx.attn_mask)
    outs = []
    for i in range(heads):
        q_h = ad.slice_cols(q, i * dh, (i + 1) * dh)
        k_h = ad.slice_cols(k, i * dh, (i + 1) * dh)
        v_h = ad.slice_cols(v, i * dh, (i + 1) * dh)
        logits = ad.mul(ad.matmul(q_h, _transpose(k_h)), 1.0 / np.sqrt(dh))
        alpha = ad.softmax(ad.add(logits, mask), axis=-1)
        outs.append(ad.matmul(alpha, v_h))
    return _linear(p, f"{name}.out", ad.concat(outs, axis=1))


def _transpose(x):
    out = ad.Tensor(x.values.T.copy())
    return ad._record(out, (x,), lambda g: (g.T.copy(),))


def _mlp(p, name, h):
    u = ad.layer_norm(h, p[f"{name}.ln.g"], p[f"{name}.ln.o"])
    u = ad.gelu(_linear(p, f"{name}.fc1", u))
    return _linear(p, f"{name}.fc2", u)


def forward(params, config, coords, t_per_node, ctx):
    """Predict per-node noise for noisy coordinates at given timesteps.

    coords: (n, 2) array, t_per_node: (n,) integer timesteps, ctx: the
    precomputed GraphContext.  Returns an (n, 2) Tensor.
    """
    c = config
    coords = np.asarray(coords, dtype=np.float64).reshape(-1, 2)
    if coords.shape[0] != ctx.num_nodes:
        raise ValueError(
            f"coords rows ({coords.shape[0]}) do not match context ({ctx.num_nodes})"
        )
    enc = sinusoidal_xy_encoding(coords, c.xy_enc_dim)
    feat = ad.Tensor(np.concatenate([coords, enc, ctx.sizes], axis=1))
    h = _linear(params, "input", feat)

    temb = ad.Tensor(timestep_encoding(t_per_node, c.t_enc_dim))
    tproj = ad.gelu(_linear(params, "tproj1", temb))
    h = ad.add(h, _linear(params, "tproj2", tproj))

    for b in range(c.blocks):
        u = ad.layer_norm(h, params[f"blk{b}.gnn.ln.g"], params[f"blk{b}.gnn.ln.o"])
        for l in range(c.layers_per_block):
            u = _gat_layer(params, f"blk{b}.gnn{l}", u, ctx, c.heads)
            if l + 1 < c.layers_per_block:
                u = ad.gelu(u)
        h = ad.add(h, u)
        h = ad.add(h, _mlp(params, f"blk{b}.mlp1", h))
        if c.use_attention:
            u = ad.layer_norm(h, params[f"blk{b}.att.ln.g"], params[f"blk{b}.att.ln.o"])
            h = ad.add(h, _attention(params, f"blk{b}.att", u, ctx, c.heads, c.attgnn_size))
        h = ad.add(h, _mlp(params, f"blk{b}.mlp2", h))

    h = ad.layer_norm(h, params["final.ln.g"], params["final.ln.o"])
    return _linear(params, "head", h)


# --- checkpoint io ---------------------------------------------------------

CKPT_FORMAT = "diffplace-checkpoint"
CKPT_VERSION = 1


def save_checkpoint(path, config, params, meta=None, opt_arrays=None):
    """Write a checkpoint: one JSON header line (config + parameter manifest
    with shapes and byte offsets) followed by raw little-endian float64
    blocks.  Round-trips bit-exactly."""
    manifest = []
    offset = 0
    blocks = []

    def register(section, name, arr):
        nonlocal offset
        arr = np.ascontiguousarray(arr, dtype="<f8")
        manifest.append(
            {"section": section, "name": name, "shape": list(arr.shape), "offset": offset}
        )
        blocks.append(arr)
        offset += arr.nbytes

    for name, p in params.items():
        register("params", name, p.values)
    if opt_arrays:
        for name, arr in opt_arrays.items():
            register("opt", name, arr)

    header = {
        "format": CKPT_FORMAT,
        "version": CKPT_VERSION,
        "config": dataclasses.asdict(config),
        "meta": meta or {},
        "manifest": manifest,
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header).encode("utf-8"))
        f.write(b"\n")
        for arr in blocks:
            f.write(arr.tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (config, params, meta, opt_arrays)."""
    with open(path, "rb") as f:
        header_line = f.readline()
        header = json.loads(header_line.decode("utf-8"))
        if header.get("format") != CKPT_FORMAT:
            raise ValueError(f"{path}: not a checkpoint file")
        if header.get("version") != CKPT_VERSION:
            raise ValueError(
                f"{path}: unsupported checkpoint version {header.get('version')}"
            )
        blob = f.read()
    config = DenoiserConfig(**header["config"])
    params = {}
    opt = {}
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(blob, dtype="<f8", count=count, offset=entry["offset"])
        a = a.reshape(shape).copy()
        if entry["section"] == "params":
            params[entry["name"]] = ad.Tensor(a, requires_grad=True)
        else:
            opt[entry["name"]] = a
    return config, params, header.get("meta", {}), opt
