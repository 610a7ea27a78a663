"""Potential-guided sampling: optimize the predicted clean placement under a
wirelength + legality potential and fold the improvement back into the noise
prediction.

The legality weight is a clamped dual variable adapted by Adam ascent on the
constraint residual (legality potential minus a small slack), interleaved
with plain gradient-descent steps on the placement.  The dual state persists
across denoising steps within one sampling trajectory.
"""

from dataclasses import dataclass

import numpy as np

from . import metrics


@dataclass(frozen=True)
class GuidanceConfig:
    w_hpwl: float = 1e-4
    x_lr: float = 0.008  # plain gradient descent on the predicted placement
    w_lr: float = 5e-4  # Adam rate for the legality weight
    w_init: float = 0.0
    inner_steps: int = 10
    slack: float = 1e-4
    w_g: float = 1.0  # scale of the guidance force in the combined score

    def __post_init__(self):
        if self.x_lr <= 0 or self.w_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.inner_steps < 1:
            raise ValueError("inner_steps must be >= 1")


@dataclass
class DualState:
    """Per-trajectory legality weight with its Adam moments (one entry per
    circuit group when sampling a batch)."""

    w: np.ndarray
    m: np.ndarray
    v: np.ndarray
    step: int
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, num_groups, config):
        return cls(
            w=np.full(num_groups, float(config.w_init)),
            m=np.zeros(num_groups),
            v=np.zeros(num_groups),
            step=0,
        )

    def ascend(self, grad, lr):
        """One Adam ascent step on w, clamped at zero."""
        self.step += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad
        mhat = self.m / (1.0 - self.beta1**self.step)
        vhat = self.v / (1.0 - self.beta2**self.step)
        self.w = np.maximum(0.0, self.w + lr * mhat / (np.sqrt(vhat) + self.eps))


def combined_potential(netlist, coords, w_hpwl, w_legality):
    """Weighted wirelength + legality potential and its analytic gradient."""
    hp, hg = metrics.hpwl_subgradient(netlist, coords)
    lv, lg = metrics.legality_potential(netlist, coords)
    value = w_hpwl * hp + w_legality * lv
    grad = w_hpwl * hg + w_legality * lg
    return value, grad


def backward_guidance(x0_hat, netlist, config, state, group_ptr=None, movable=None):
    """Inner optimization of the predicted placement.

    Runs config.inner_steps iterations of (a) one gradient-descent step on the
    combined potential at the current legality weight, then (b) one Adam
    ascent step on the weight with gradient (legality potential - slack).
    Returns (delta, state, ok); delta is zero and ok False if anything went
    non-finite.
    """
    x0_hat = np.asarray(x0_hat, dtype=np.float64).reshape(-1, 2)
    n = x0_hat.shape[0]
    if group_ptr is None:
        group_ptr = np.asarray([0, n], dtype=np.int64)
    if state is None:
        state = DualState.init(group_ptr.shape[0] - 1, config)
    if movable is None:
        movable = np.ones(n, dtype=bool)
    group_of = np.repeat(np.arange(group_ptr.shape[0] - 1), np.diff(group_ptr))

    x = x0_hat.copy()
    for _ in range(config.inner_steps):
        _, hg = metrics.hpwl_subgradient(netlist, x)
        _, lg = metrics.legality_potential_groups(netlist, x, group_ptr)
        grad = config.w_hpwl * hg + state.w[group_of, None] * lg
        if not np.isfinite(grad).all():
            return np.zeros_like(x0_hat), state, False
        x[movable] -= config.x_lr * grad[movable]
        lvals, _ = metrics.legality_potential_groups(netlist, x, group_ptr)
        state.ascend(lvals - config.slack, config.w_lr)
    if not np.isfinite(x).all():
        return np.zeros_like(x0_hat), state, False
    return x - x0_hat, state, True


def guided_score(eps_hat, delta, t, schedule, w_g=1.0):
    """Translate a clean-placement improvement into noise-prediction space so
    that the implied clean placement moves by exactly w_g * delta."""
    coef = schedule.sqrt_ab[t] / schedule.sqrt_1mab[t]
    return eps_hat - w_g * coef * delta
