import numpy as np
import pytest

from diffplace.netlist import Netlist, Pin


def assert_rel_close(a, b, rtol, atol=1e-7):
    """Componentwise check: relative error <= rtol, or absolute <= atol.

    The absolute escape absorbs central-difference noise (~1e-9 at h=1e-6 in
    double precision) on components that are exactly zero analytically."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = np.abs(a - b)
    denom = np.maximum(np.abs(a), np.abs(b))
    ok = (diff <= atol) | (diff <= rtol * denom)
    worst = (diff / np.maximum(denom, 1e-300)).max() if not ok.all() else 0.0
    assert ok.all(), f"max rel err {worst:.3e} > {rtol:.0e} (atol {atol:.0e})"


def central_diff(f, x, h=1e-6):
    """Central finite differences of scalar f over array x."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros(x.size)
    flat = x.reshape(-1)
    for i in range(x.size):
        xp = flat.copy()
        xm = flat.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp.reshape(x.shape)) - f(xm.reshape(x.shape))) / (2 * h)
    return g.reshape(x.shape)


def random_netlist(rng, n=10, nets_count=None, edge_count=None, max_size=0.4):
    """Random netlist with in-bounds pin offsets; nets, edges, or both."""
    sizes = rng.uniform(0.05, max_size, (n, 2))

    def rand_pin(owner):
        return Pin(
            int(owner),
            rng.uniform(-0.5, 0.5) * sizes[owner, 0],
            rng.uniform(-0.5, 0.5) * sizes[owner, 1],
        )

    nets = None
    if nets_count:
        nets = []
        for _ in range(nets_count):
            k = int(rng.integers(2, 6))
            owners = rng.choice(n, size=k, replace=True)
            nets.append([rand_pin(o) for o in owners])

    edges = []
    if edge_count:
        for _ in range(edge_count):
            i, j = rng.choice(n, size=2, replace=False)
            pi, pj = rand_pin(i), rand_pin(j)
            edges.append((int(i), int(j), (pi.dx, pi.dy), (pj.dx, pj.dy)))

    return Netlist.build([(w, h) for w, h in sizes], edges=edges, nets=nets)


def random_coords(rng, n, lo=-0.8, hi=0.8):
    return rng.uniform(lo, hi, (n, 2))


def nondegenerate_coords(rng, netlist, margin=1e-3, tries=200):
    """Placement away from subgradient ties: distinct per-net extremes, no
    near-equal pair gaps, no near-touching pairs or walls."""
    n = netlist.num_objects
    ptr, owner, off = netlist.hpwl_csr()
    for _ in range(tries):
        coords = random_coords(rng, n)
        ok = True
        pos = coords[owner] + off
        for k in range(ptr.shape[0] - 1):
            s, e = ptr[k], ptr[k + 1]
            for axis in (0, 1):
                v = np.sort(pos[s:e, axis])
                if v.size >= 2 and (np.diff(v) < margin).any():
                    ok = False
        if not ok:
            continue
        w = netlist.sizes[:, 0]
        h = netlist.sizes[:, 1]
        for i in range(n):
            for j in range(i + 1, n):
                gx = abs(coords[i, 0] - coords[j, 0]) - (w[i] + w[j]) / 2
                gy = abs(coords[i, 1] - coords[j, 1]) - (h[i] + h[j]) / 2
                if abs(gx - gy) < margin or abs(max(gx, gy)) < margin:
                    ok = False
        sides = np.concatenate(
            [
                coords[:, 0] - w / 2 + 1.0,
                1.0 - coords[:, 0] - w / 2,
                coords[:, 1] - h / 2 + 1.0,
                1.0 - coords[:, 1] - h / 2,
            ]
        )
        if (np.abs(sides) < margin).any():
            ok = False
        if ok:
            return coords
    raise RuntimeError("could not build a non-degenerate placement")


def mc_union_area(netlist, coords, n_side=1000, seed=0):
    """Stratified Monte Carlo estimate of the clipped union area: one jittered
    sample point per cell of an n_side x n_side grid."""
    rng = np.random.default_rng(seed)
    pitch = 2.0 / n_side
    jx = rng.random((n_side, n_side))
    jy = rng.random((n_side, n_side))
    px = -1.0 + (np.arange(n_side)[:, None] + jx) * pitch
    py = -1.0 + (np.arange(n_side)[None, :] + jy) * pitch
    hit = np.zeros((n_side, n_side), dtype=bool)
    hw = netlist.sizes[:, 0] / 2
    hh = netlist.sizes[:, 1] / 2
    for i in range(netlist.num_objects):
        lox = max(coords[i, 0] - hw[i], -1.0)
        hix = min(coords[i, 0] + hw[i], 1.0)
        loy = max(coords[i, 1] - hh[i], -1.0)
        hiy = min(coords[i, 1] + hh[i], 1.0)
        if hix <= lox or hiy <= loy:
            continue
        a = max(int(np.floor((lox + 1) / pitch)), 0)
        b = min(int(np.ceil((hix + 1) / pitch)), n_side)
        c = max(int(np.floor((loy + 1) / pitch)), 0)
        d = min(int(np.ceil((hiy + 1) / pitch)), n_side)
        win_x = px[a:b, c:d]
        win_y = py[a:b, c:d]
        hit[a:b, c:d] |= (win_x >= lox) & (win_x < hix) & (win_y >= loy) & (win_y < hiy)
    return hit.mean() * 4.0


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
