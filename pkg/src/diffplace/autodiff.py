"""Minimal reverse-mode autodiff over numpy arrays.

A Tape records primitive operations during the forward pass (only while a
``with Tape():`` block is active and some input requires grad); backward
replays the records in exact reverse order, accumulating gradients into the
``grad`` field of every tensor that requires them.  A tape is consumed by one
backward call.  Double precision throughout; single-threaded per tape.
"""

import math

import numpy as np

from . import kernels

_active_tape = None


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "tape")

    def __init__(self, values, requires_grad=False):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self.tape = None

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of primitive ops; consumed by a single backward pass."""

    def __init__(self):
        self._records = []
        self._consumed = False
        self._prev = None

    def __enter__(self):
        global _active_tape
        self._prev = _active_tape
        _active_tape = self
        return self

    def __exit__(self, *exc):
        global _active_tape
        _active_tape = self._prev
        return False

    def backward(self, loss):
        if self._consumed:
            raise RuntimeError("tape already consumed; run a new forward pass")
        if loss.values.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        self._consumed = True
        loss.grad = np.ones_like(loss.values)
        for rec in reversed(self._records):
            rec()


def backward(loss):
    """Run backward from a scalar loss recorded on a tape."""
    if not isinstance(loss, Tensor) or loss.tape is None:
        raise ValueError("loss is not connected to a tape")
    loss.tape.backward(loss)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out, inputs, backward_fn):
    """Attach a backward record if a tape is active and any input needs grad."""
    t = _active_tape
    if t is None:
        return out
    tracked = [x for x in inputs if isinstance(x, Tensor) and x.requires_grad]
    if not tracked:
        return out
    out.requires_grad = True
    out.tape = t

    def rec():
        g = out.grad
        if g is None:
            return
        for x, gx in zip(inputs, backward_fn(g)):
            if gx is None or not isinstance(x, Tensor) or not x.requires_grad:
                continue
            x.grad = gx if x.grad is None else x.grad + gx

    t._records.append(rec)
    return out


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.values + b.values)
    return _record(
        out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))
    )


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.values - b.values)
    return _record(
        out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))
    )


def mul(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.values * b.values)
    return _record(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g * b.values, a.shape),
            _unbroadcast(g * a.values, b.shape),
        ),
    )


def div(a, b):
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.values / b.values)
    return _record(
        out,
        (a, b),
        lambda g: (
            _unbroadcast(g / b.values, a.shape),
            _unbroadcast(-g * a.values / (b.values * b.values), b.shape),
        ),
    )


def neg(a):
    out = Tensor(-a.values)
    return _record(out, (a,), lambda g: (-g,))


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ValueError(
            f"matmul expects 2D operands, got {a.values.ndim}D and {b.values.ndim}D"
        )
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = Tensor(a.values @ b.values)
    return _record(
        out, (a, b), lambda g: (g @ b.values.T, a.values.T @ g)
    )


def concat(tensors, axis=-1):
    tensors = [_wrap(t) for t in tensors]
    out = Tensor(np.concatenate([t.values for t in tensors], axis=axis))
    sizes = [t.values.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        return [np.ascontiguousarray(p) for p in np.split(g, splits, axis=axis)]

    return _record(out, tuple(tensors), bwd)


def slice_cols(a, start, stop):
    out = Tensor(a.values[:, start:stop].copy())

    def bwd(g):
        full = np.zeros_like(a.values)
        full[:, start:stop] = g
        return (full,)

    return _record(out, (a,), bwd)


def gather(a, idx):
    """Rows of a at integer indices idx (duplicates allowed)."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    out = Tensor(a.values[idx])
    n = a.values.shape[0]
    return _record(out, (a,), lambda g: (kernels.segment_sum(np.ascontiguousarray(g), idx, n),))


def segment_sum(a, seg, n):
    """Sum rows of a into n buckets given by seg (e.g. by edge target)."""
    seg = np.ascontiguousarray(seg, dtype=np.int64)
    out = Tensor(kernels.segment_sum(np.ascontiguousarray(a.values), seg, n))
    return _record(out, (a,), lambda g: (g[seg],))


def segment_max(a, seg, n):
    """Per-bucket max of rows of a; gradient flows to the first max element."""
    seg = np.ascontiguousarray(seg, dtype=np.int64)
    vals, arg = kernels.segment_max(np.ascontiguousarray(a.values), seg, n)
    out = Tensor(vals)
    e, d = a.values.shape

    def bwd(g):
        gx = np.zeros_like(a.values)
        valid = arg >= 0
        rows = arg[valid]
        cols = np.nonzero(valid)[1]
        np.add.at(gx, (rows, cols), g[valid])
        return (gx,)

    return _record(out, (a,), bwd)


def exp(a):
    out = Tensor(np.exp(a.values))
    return _record(out, (a,), lambda g: (g * out.values,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a):
    """tanh-form GELU."""
    x = a.values
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    out = Tensor(0.5 * x * (1.0 + t))

    def bwd(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    return _record(out, (a,), bwd)


def leaky_relu(a, alpha=0.2):
    x = a.values
    out = Tensor(np.where(x >= 0, x, alpha * x))
    return _record(out, (a,), lambda g: (g * np.where(x >= 0, 1.0, alpha),))


def layer_norm(a, gain, bias, eps=1e-5):
    """Normalize the last axis to zero mean / unit variance, then scale+shift."""
    x = a.values
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = Tensor(xhat * gain.values + bias.values)

    def bwd(g):
        dxhat = g * gain.values
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = (dxhat - m1 - xhat * m2) * inv
        dgain = _unbroadcast(g * xhat, gain.shape)
        dbias = _unbroadcast(g, bias.shape)
        return (dx, dgain, dbias)

    return _record(out, (a, gain, bias), bwd)


def softmax(a, axis=-1):
    x = a.values
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return _record(out, (a,), bwd)


def tsum(a, axis=None, keepdims=False):
    out = Tensor(a.values.sum(axis=axis, keepdims=keepdims))

    def bwd(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _record(out, (a,), bwd)


def tmean(a, axis=None, keepdims=False):
    count = a.values.size if axis is None else a.values.shape[axis]
    return mul(tsum(a, axis, keepdims), 1.0 / count)


def mse_rowsum(pred, target):
    """Mean over rows of the squared row error (sum over columns)."""
    d = sub(pred, target)
    return tmean(tsum(mul(d, d), axis=1))


class Adam:
    """Standard Adam with bias correction over a dict of parameter tensors."""

    def __init__(self, params, lr=3e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(p.values) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.values) for k, p in params.items()}

    def step(self, params, lr=None):
        lr = self.lr if lr is None else lr
        self.step_count += 1
        b1c = 1.0 - self.beta1**self.step_count
        b2c = 1.0 - self.beta2**self.step_count
        for k, p in params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.values)
            m = self.m[k]
            v = self.v[k]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p.values = p.values - lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def zero_grad(self, params):
        for p in params.values():
            p.zero_grad()

    def state_arrays(self):
        """Flat view of optimizer state for checkpointing."""
        out = {"step": np.asarray([self.step_count], dtype=np.float64)}
        for k in self.m:
            out[f"m.{k}"] = self.m[k]
            out[f"v.{k}"] = self.v[k]
        return out

    def load_state_arrays(self, arrays):
        self.step_count = int(arrays["step"][0])
        for k in self.m:
            self.m[k] = arrays[f"m.{k}"].reshape(self.m[k].shape).copy()
            self.v[k] = arrays[f"v.{k}"].reshape(self.v[k].shape).copy()
