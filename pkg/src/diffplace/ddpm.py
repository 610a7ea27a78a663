"""Diffusion core: cosine noise schedule, forward noising, the training
objective, and the reverse (ancestral) sampling loop with guidance hooks.

Timesteps run t = 0..T with t = 0 the clean data; alphabar[0] == 1 exactly.
The per-step update is x_{t-1} = coef_x[t] * x_t + coef_eps[t] * eps_hat +
sigma[t] * z with the standard posterior coefficients; sigma[1] == 0 so the
final step is deterministic.
"""

import numpy as np

from . import autodiff as ad
from . import denoiser as dn
from .netlist import concat_netlists

X0_CLIP = 1.5  # slight slack beyond the canvas while sampling


class NoiseSchedule:
    """Per-step diffusion coefficients over T steps (arrays indexed 0..T)."""

    def __init__(self, T, alphabar):
        self.T = int(T)
        self.alphabar = np.asarray(alphabar, dtype=np.float64)
        if self.alphabar.shape[0] != T + 1:
            raise ValueError("alphabar must have T+1 entries")
        ab = self.alphabar
        self.alpha = np.ones(T + 1)
        self.alpha[1:] = ab[1:] / ab[:-1]
        self.sqrt_ab = np.sqrt(ab)
        self.sqrt_1mab = np.sqrt(1.0 - ab)
        self.coef_x = np.ones(T + 1)
        self.coef_eps = np.zeros(T + 1)
        self.sigma = np.zeros(T + 1)
        a = self.alpha[1:]
        self.coef_x[1:] = 1.0 / np.sqrt(a)
        self.coef_eps[1:] = -(1.0 - a) / (np.sqrt(a) * self.sqrt_1mab[1:])
        beta = 1.0 - a
        post_var = beta * (1.0 - ab[:-1]) / (1.0 - ab[1:])
        self.sigma[1:] = np.sqrt(post_var)
        self._validate()

    def _validate(self):
        ab = self.alphabar
        if not (np.diff(ab) < 0).all():
            raise ValueError("alphabar must be strictly decreasing")
        if not ab[0] > 0.999:
            raise ValueError(f"alphabar[0] = {ab[0]} should be ~1")
        if not ab[-1] < 1e-3:
            raise ValueError(f"alphabar[T] = {ab[-1]} should be < 1e-3")
        if (self.sigma < 0).any() or self.sigma[1] != 0.0:
            raise ValueError("sigma must be >= 0 with sigma[1] == 0")


def cosine_schedule(T=1000, offset=0.008):
    """Cosine alphabar with the usual small-t offset; per-step alpha floored
    at 0.001 to keep late steps bounded."""
    if T < 1:
        raise ValueError("T must be >= 1")
    t = np.arange(T + 1, dtype=np.float64)
    f = np.cos(((t / T + offset) / (1.0 + offset)) * np.pi / 2.0) ** 2
    raw = f / f[0]
    alpha = np.clip(raw[1:] / raw[:-1], 0.001, 1.0)
    alphabar = np.concatenate([[1.0], np.cumprod(alpha)])
    return NoiseSchedule(T, alphabar)


def q_sample(x0, t, eps, schedule):
    """Forward noising: x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps."""
    t = np.asarray(t)
    sa = schedule.sqrt_ab[t]
    sb = schedule.sqrt_1mab[t]
    if t.ndim:
        sa = sa[:, None]
        sb = sb[:, None]
    return sa * x0 + sb * eps


def predict_x0(x_t, t, eps_hat, schedule, clip=X0_CLIP):
    """Algebraic estimate of the clean sample implied by x_t and eps_hat."""
    t = np.asarray(t)
    sa = schedule.sqrt_ab[t]
    sb = schedule.sqrt_1mab[t]
    if t.ndim:
        sa = sa[:, None]
        sb = sb[:, None]
    x0 = (x_t - sb * eps_hat) / sa
    if clip is not None:
        x0 = np.clip(x0, -clip, clip)
    return x0


def make_eps_fn(params, config, ctx):
    """Wrap the denoiser as a plain callable (coords, t_per_node) -> eps."""

    def eps_fn(coords, t_per_node):
        return dn.forward(params, config, coords, t_per_node, ctx).values

    return eps_fn


def training_step(batch, params, config, opt, schedule, rng, lr=None, step_index=0):
    """One optimizer step on a batch of (netlist, x0 coords) pairs.

    Timesteps are drawn uniformly per circuit; the loss is the mean over
    non-fixed nodes of the squared row error between the predicted and true
    noise.  Returns the loss value.
    """
    if not batch:
        raise ValueError("empty training batch")
    netlists = [nl for nl, _ in batch]
    merged, group_ptr = concat_netlists(netlists)
    ctx = dn.build_context(merged, group_ptr)
    x0 = np.concatenate([np.asarray(c, dtype=np.float64).reshape(-1, 2) for _, c in batch])

    t_circ = rng.integers(1, schedule.T + 1, size=len(batch))
    t_nodes = np.repeat(t_circ, np.diff(group_ptr))
    eps = rng.standard_normal(x0.shape)
    movable = ~ctx.fixed_mask
    eps[~movable] = 0.0
    x_t = q_sample(x0, t_nodes, eps, schedule)
    x_t[~movable] = x0[~movable]

    midx = np.nonzero(movable)[0]
    opt.zero_grad(params)
    with ad.Tape() as tape:
        out = dn.forward(params, config, x_t, t_nodes, ctx)
        loss = ad.mse_rowsum(ad.gather(out, midx), ad.Tensor(eps[midx]))
    loss_val = float(loss.values)
    if not np.isfinite(loss_val):
        ids = [i for i in range(len(batch))]
        raise RuntimeError(
            f"non-finite loss at step {step_index} (batch circuits {ids})"
        )
    tape.backward(loss)
    opt.step(params, lr=lr)
    return loss_val


def sample_batch(
    netlist,
    group_ptr,
    eps_fn,
    schedule,
    seed,
    guidance_cfg=None,
    fixed_coords=None,
    snapshot_every=None,
    deterministic=False,
):
    """Reverse diffusion over a (possibly batched) netlist.

    Returns (coords, snapshots) where snapshots is a list of (label, coords)
    holding x_T, the predicted clean placements at snapshot intervals, and the
    final output; empty unless snapshot_every is set.
    """
    from . import guidance as gd

    rng = np.random.default_rng([int(seed), 0x5A3B])
    n = netlist.num_objects
    movable = netlist.movable_mask()
    if not movable.all() and fixed_coords is None:
        raise ValueError("netlist has fixed objects; fixed_coords required")

    x = rng.standard_normal((n, 2))
    if fixed_coords is not None:
        x[~movable] = np.asarray(fixed_coords, dtype=np.float64).reshape(-1, 2)[~movable]

    state = None
    if guidance_cfg is not None:
        state = gd.DualState.init(group_ptr.shape[0] - 1, guidance_cfg)

    snaps = []
    if snapshot_every:
        snaps.append(("x_T", x.copy()))

    for t in range(schedule.T, 0, -1):
        t_nodes = np.full(n, t, dtype=np.int64)
        eps = np.asarray(eps_fn(x, t_nodes), dtype=np.float64)
        eps[~movable] = 0.0
        if guidance_cfg is not None:
            x0_hat = predict_x0(x, t, eps, schedule)
            x0_hat[~movable] = x[~movable]
            delta, state, ok = gd.backward_guidance(
                x0_hat, netlist, guidance_cfg, state, group_ptr, movable
            )
            if ok:
                eps = gd.guided_score(eps, delta, t, schedule, guidance_cfg.w_g)
        if not np.isfinite(x).all():
            raise RuntimeError(f"non-finite sampling state at t={t}")
        z = np.zeros_like(x)
        if t > 1 and not deterministic:
            z = rng.standard_normal(x.shape)
        if snapshot_every and (schedule.T - t) % snapshot_every == 0:
            snap = predict_x0(x, t, eps, schedule)
            snaps.append((f"t={t}", np.where(movable[:, None], snap, x)))
        upd = schedule.coef_x[t] * x + schedule.coef_eps[t] * eps + schedule.sigma[t] * z
        x[movable] = upd[movable]

    x[movable] = np.clip(x[movable], -1.0, 1.0)
    if snapshot_every:
        snaps.append(("x_0", x.copy()))
    return x, snaps


def sample(
    netlist,
    params,
    config,
    schedule,
    seed,
    guidance_cfg=None,
    fixed_coords=None,
    snapshot_every=None,
    deterministic=False,
):
    """Sample a placement for one netlist with the trained denoiser."""
    group_ptr = np.asarray([0, netlist.num_objects], dtype=np.int64)
    ctx = dn.build_context(netlist, group_ptr)
    eps_fn = make_eps_fn(params, config, ctx)
    return sample_batch(
        netlist,
        group_ptr,
        eps_fn,
        schedule,
        seed,
        guidance_cfg=guidance_cfg,
        fixed_coords=fixed_coords,
        snapshot_every=snapshot_every,
        deterministic=deterministic,
    )
