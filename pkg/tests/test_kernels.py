"""Backend equivalence: the compiled kernels must agree with the numpy
reference implementations, and the broad-phase pruning must not change
results within a backend."""

import numpy as np
import pytest

from conftest import assert_rel_close
from diffplace import kernels

BACKENDS = ["numpy"]
try:
    kernels.get_backend("compiled")
    BACKENDS.append("compiled")
except ImportError:
    pass

needs_compiled = pytest.mark.skipif(
    "compiled" not in BACKENDS, reason="compiled kernels not built"
)


def _random_instance(rng, n=60, groups=3):
    sizes = rng.uniform(0.02, 0.5, (n, 2))
    coords = rng.uniform(-0.9, 0.9, (n, 2))
    cuts = np.sort(rng.choice(np.arange(1, n), size=groups - 1, replace=False))
    group_ptr = np.concatenate([[0], cuts, [n]]).astype(np.int64)
    return coords, sizes, group_ptr


def _random_csr(rng, n=30, nets=40):
    lens = rng.integers(1, 6, size=nets)
    ptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
    owner = rng.integers(0, n, size=ptr[-1]).astype(np.int64)
    off = rng.uniform(-0.1, 0.1, (int(ptr[-1]), 2))
    coords = rng.uniform(-0.9, 0.9, (n, 2))
    return coords, ptr, owner, off


@needs_compiled
def test_hpwl_grad_backends_agree(rng):
    a = kernels.get_backend("numpy")
    b = kernels.get_backend("compiled")
    for _ in range(20):
        coords, ptr, owner, off = _random_csr(rng)
        ha, ga = a.hpwl_grad(coords, ptr, owner, off, True)
        hb, gb = b.hpwl_grad(coords, ptr, owner, off, True)
        np.testing.assert_array_equal(ha, hb)
        np.testing.assert_array_equal(ga, gb)


@needs_compiled
def test_pair_potential_backends_agree(rng):
    a = kernels.get_backend("numpy")
    b = kernels.get_backend("compiled")
    for _ in range(20):
        coords, sizes, group_ptr = _random_instance(rng, n=int(rng.integers(2, 150)))
        va, ga, ca = a.pair_potential(coords, sizes, group_ptr, True)
        vb, gb, cb = b.pair_potential(coords, sizes, group_ptr, True)
        np.testing.assert_array_equal(ca, cb)
        assert_rel_close(va, vb, 1e-12)
        assert_rel_close(ga, gb, 1e-12)


@pytest.mark.parametrize("backend", BACKENDS)
def test_pair_potential_broadphase_identical(backend, rng):
    # pruning pairs with positive x-gap must not change anything
    k = kernels.get_backend(backend)
    for _ in range(15):
        coords, sizes, group_ptr = _random_instance(rng, n=int(rng.integers(2, 160)))
        v1, g1, c1 = k.pair_potential(coords, sizes, group_ptr, True)
        v2, g2, c2 = k.pair_potential(coords, sizes, group_ptr, False)
        np.testing.assert_array_equal(v1, v2)
        np.testing.assert_array_equal(g1, g2)
        np.testing.assert_array_equal(c1, c2)


@pytest.mark.parametrize("backend", BACKENDS)
def test_pair_potential_groups_isolated(backend, rng):
    # objects in different groups never interact
    k = kernels.get_backend(backend)
    coords = np.zeros((4, 2))
    sizes = np.full((4, 2), 0.5)
    both = k.pair_potential(coords, sizes, np.asarray([0, 4], dtype=np.int64), False)
    split = k.pair_potential(coords, sizes, np.asarray([0, 2, 4], dtype=np.int64), False)
    assert both[2].sum() == 6  # all pairs overlap
    assert split[2].sum() == 2  # only within-group pairs


@needs_compiled
def test_union_area_backends_agree(rng):
    a = kernels.get_backend("numpy")
    b = kernels.get_backend("compiled")
    for _ in range(20):
        n = int(rng.integers(1, 120))
        lox = rng.uniform(-1, 0.8, n)
        loy = rng.uniform(-1, 0.8, n)
        hix = lox + rng.uniform(0.0, 0.5, n)
        hiy = loy + rng.uniform(0.0, 0.5, n)
        assert_rel_close(a.union_area(lox, loy, hix, hiy),
                         b.union_area(lox, loy, hix, hiy), 1e-12)


@needs_compiled
def test_rudy_fill_backends_agree(rng):
    a = kernels.get_backend("numpy")
    b = kernels.get_backend("compiled")
    for _ in range(10):
        n = int(rng.integers(1, 40))
        lox = rng.uniform(-1, 0.8, n)
        loy = rng.uniform(-1, 0.8, n)
        hix = np.minimum(lox + rng.uniform(0.01, 0.6, n), 1.0)
        hiy = np.minimum(loy + rng.uniform(0.01, 0.6, n), 1.0)
        w = rng.uniform(0.1, 5.0, n)
        ga = a.rudy_fill(lox, loy, hix, hiy, w, 16)
        gb = b.rudy_fill(lox, loy, hix, hiy, w, 16)
        assert_rel_close(ga, gb, 1e-12, atol=1e-15)


@needs_compiled
def test_segment_ops_backends_agree(rng):
    a = kernels.get_backend("numpy")
    b = kernels.get_backend("compiled")
    for _ in range(10):
        e, d, n = int(rng.integers(1, 200)), int(rng.integers(1, 8)), 20
        vals = rng.normal(size=(e, d))
        seg = rng.integers(0, n, size=e).astype(np.int64)
        np.testing.assert_array_equal(a.segment_sum(vals, seg, n), b.segment_sum(vals, seg, n))
        va, ia = a.segment_max(vals, seg, n)
        vb, ib = b.segment_max(vals, seg, n)
        np.testing.assert_array_equal(va, vb)
        np.testing.assert_array_equal(ia, ib)


@pytest.mark.parametrize("backend", BACKENDS)
def test_segment_ops_match_loop_oracle(backend, rng):
    k = kernels.get_backend(backend)
    e, d, n = 50, 3, 8
    vals = rng.normal(size=(e, d))
    seg = rng.integers(0, n, size=e).astype(np.int64)
    ssum = np.zeros((n, d))
    smax = np.full((n, d), -np.inf)
    sarg = np.full((n, d), -1, dtype=np.int64)
    for t in range(e):
        ssum[seg[t]] += vals[t]
        for c in range(d):
            if vals[t, c] > smax[seg[t], c]:
                smax[seg[t], c] = vals[t, c]
                sarg[seg[t], c] = t
    got_sum = k.segment_sum(vals, seg, n)
    assert_rel_close(got_sum, ssum, 1e-12)
    got_max, got_arg = k.segment_max(vals, seg, n)
    present = sarg >= 0
    np.testing.assert_array_equal(got_arg, sarg)
    np.testing.assert_array_equal(got_max[present], smax[present])
